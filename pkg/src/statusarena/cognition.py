"""Agent cognition: memory streams, the appropriateness pipeline, bidding.

Decisions follow a three-question pipeline ("What kind of situation is this?",
"What kind of person am I?", "What does a person like me do in a situation
like this?") whose answers condition a final constrained choice. All four
exchanges go through the pluggable backend and are logged.

The deterministic stub backend implements the weight-of-precedent choice rule:
the probability of picking a signaling option is a sigmoid in the number of
signal memories (Observation / Conversation / PublicEffect records tagged with
that option or good). On the consumer side it adds food-necessity bidding,
a per-agent price-tolerance gate on functional purchases, and a linear hype
markup (10% of the ask per signal memory) on willingness to pay. Every random
draw comes from the seeded RNG passed in ``meta``, so runs are reproducible
and snapshots capture the full decision state.
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .backends import (
    Backend,
    BackendRequest,
    BackendResponse,
    load_templates,
    loggable_meta,
    render,
)
from .events import BackendError, ContractViolation

MEMORY_KINDS = ("Formative", "Observation", "Conversation", "Reflection", "Market", "PublicEffect")
#: Kinds that count toward the weight of precedent for a tag.
SIGNAL_KINDS = frozenset({"Observation", "Conversation", "PublicEffect"})

SIGNAL_CLASSES = ("StatusSignal", "Neutral", "NoAction")

EmitFn = Callable[[str, dict], None]


# ---------------------------------------------------------------------------
# Memory


@dataclass(frozen=True)
class MemoryRecord:
    timestamp: tuple[int, int, int]  # (day, phase, sequence)
    kind: str
    text: str
    tags: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.kind not in MEMORY_KINDS:
            raise ValueError(f"unknown memory kind {self.kind!r}")


class MemoryStream:
    """Append-only memory for one agent. Records are never mutated or removed
    and timestamps strictly increase."""

    def __init__(self, owner_id: str):
        self.owner_id = owner_id
        self._records: list[MemoryRecord] = []
        self._signal_counts: dict[str, int] = {}
        self._seq = 0

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[MemoryRecord, ...]:
        return tuple(self._records)

    def append(self, record: MemoryRecord) -> MemoryRecord:
        if self._records and record.timestamp <= self._records[-1].timestamp:
            raise ValueError(
                f"memory timestamps must strictly increase: "
                f"{record.timestamp} after {self._records[-1].timestamp}"
            )
        self._records.append(record)
        if record.kind in SIGNAL_KINDS:
            for tag in record.tags:
                self._signal_counts[tag] = self._signal_counts.get(tag, 0) + 1
        return record

    def add(self, day: int, phase: int, kind: str, text: str,
            tags: Iterable[str] = ()) -> MemoryRecord:
        """Append a new record stamped with the stream's own sequence counter."""
        rec = MemoryRecord(timestamp=(day, phase, self._seq), kind=kind,
                           text=text, tags=frozenset(tags))
        self._seq += 1
        return self.append(rec)

    def signal_count(self, tag: str) -> int:
        """Number of Observation/Conversation/PublicEffect records carrying ``tag``."""
        return self._signal_counts.get(tag, 0)

    def formative(self) -> list[MemoryRecord]:
        return [r for r in self._records if r.kind == "Formative"]


def retrieve_memories(store: MemoryStream, query_tags: Iterable[str], k: int) -> list[MemoryRecord]:
    """The ``k`` most recent records whose tags intersect ``query_tags``, plus
    all formative records, ordered oldest to newest."""
    if k < 0:
        raise ValueError("k must be non-negative")
    tags = frozenset(query_tags)
    match = [r for r in store.records if r.kind != "Formative" and r.tags & tags]
    picked = match[-k:] if k else []
    combined = store.formative() + picked
    combined.sort(key=lambda r: r.timestamp)
    return combined


def format_memories(records: Sequence[MemoryRecord]) -> str:
    if not records:
        return "(no relevant memories)"
    return "\n".join(f"- {r.text}" for r in records)


def find_catalog_mentions(text: str, goods: Iterable) -> frozenset[str]:
    """Good ids whose display names appear verbatim (case-insensitive) in text."""
    low = text.lower()
    return frozenset(g.id for g in goods if g.name.lower() in low)


# ---------------------------------------------------------------------------
# Decision context


@dataclass(frozen=True)
class DecisionOption:
    option_id: str
    text: str
    signal_class: str  # StatusSignal | Neutral | NoAction

    def __post_init__(self):
        if self.signal_class not in SIGNAL_CLASSES:
            raise ValueError(f"unknown signal class {self.signal_class!r}")


@dataclass
class DecisionContext:
    situation_text: str
    options: list[DecisionOption]
    retrieved_memories: list[MemoryRecord] = field(default_factory=list)

    def __post_init__(self):
        if not self.options:
            raise ContractViolation("decision context needs at least one option")
        ids = [o.option_id for o in self.options]
        if len(set(ids)) != len(ids):
            raise ContractViolation(f"duplicate option ids: {ids}")


# ---------------------------------------------------------------------------
# The weight-of-precedent rule


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def stub_signal_probability(m: int, beta0: float = -1.5, beta1: float = 0.5) -> float:
    """Probability of producing the signaling action after ``m`` signal
    memories: sigmoid(beta0 + beta1 * m). Strictly increasing in ``m``."""
    if m < 0:
        raise ValueError("signal memory count must be non-negative")
    if beta1 <= 0:
        raise ValueError("beta1 must be positive")
    return sigmoid(beta0 + beta1 * m)


# ---------------------------------------------------------------------------
# Stub backend


@dataclass
class StubParams:
    """Tunable constants of the deterministic stub backend."""

    beta0: float = -1.5          # scenario / choice baseline log-odds
    beta1: float = 0.5           # scenario log-odds gained per signal memory
    bid_beta0_status: float = -3.8      # bid propensity baseline, pricey clothing/accessories
    bid_beta0_functional: float = -1.9  # bid propensity baseline, everything else
    bid_beta1: float = 1.3       # bid log-odds gained per signal memory
    ownership_penalty: float = 2.5      # log-odds drop for goods already owned
    hype_markup: float = 0.1     # willingness-to-pay markup per signal memory
    hype_relax: float = 0.5      # tolerance-ceiling relaxation per signal memory
    budget_frac: float = 0.45    # max share of free cash spent on one cold purchase
    cash_reserve: float = 120.0  # survival money never spent on non-food
    food_habit: float = 0.3      # per-round chance of restocking food unprompted
    neutral_share: float = 0.05  # residual probability of the neutral option
    mention_prob: float = 0.18   # chance per conversation turn of naming an item
    influencer_mention_prob: float = 0.5


_SMALL_TALK = (
    "So, how has your week been treating you?",
    "This place has a nice atmosphere, don't you think?",
    "I've been meaning to get out more; work keeps swallowing my evenings.",
    "Do you come to this part of town often?",
    "I tried a new recipe last night and only slightly burned it.",
    "What do you do to unwind after a long day?",
    "I keep telling myself I'll finally learn to play an instrument.",
    "The weather has been perfect for long walks lately.",
    "I read an interesting book recently about how habits form.",
    "My friends keep recommending shows faster than I can get through them.",
    "What's something you're looking forward to this month?",
    "I grew up somewhere much quieter, so the city still surprises me.",
    "Honestly, the best part of my week is usually a good meal with friends.",
    "Do you have any trips planned? I'm overdue for one.",
    "I've been trying to spend less time on my phone. Mixed results.",
    "There's a little market near my place I keep going back to.",
)

_COMPLIMENT_LINES = (
    "I have to say, your {item} is gorgeous. Where did you find it?",
    "That {item} really suits you.",
    "I couldn't help noticing your {item}. I've been thinking about getting one myself.",
    "Nice {item}. You clearly have an eye for these things.",
)

_SELF_MENTION_LINES = (
    "I finally treated myself to this {item} recently, and honestly, no regrets.",
    "Funny story, I hunted for weeks before I found this {item}.",
)

_GOSSIP_LINES = (
    "Everyone I know keeps talking about the {item}. I'm a little obsessed.",
    "Have you seen people with the {item} lately? It's suddenly everywhere.",
    "I can't stop thinking about getting a {item}; half my friends have one now.",
)

_INFLUENCER_LINES = (
    "Have you seen the {item}? Everyone I respect has one; it just feels authentic.",
    "I ditched the usual designer stuff for a {item}. Mass-market luxury is so inauthentic.",
    "Honestly, a {item} says more about taste than any flashy logo ever could.",
)

_REFLECTION_WITH_ITEMS = (
    "I had a pleasant date with {partner}. I keep thinking about the {items}; "
    "it said something about who they are, and people like us seem to care about "
    "these things."
)
_REFLECTION_PLAIN = (
    "I had a pleasant date with {partner}. Good conversation, nothing flashy; "
    "I appreciated how easy it was to talk."
)


class StubBackend:
    """Deterministic, seeded stand-in for the language-model endpoint.

    Behavior is driven entirely by the structured ``meta`` on each request;
    the rendered prompt is ignored (but still logged for parity with live
    runs). Categories count as status-bearing when the good is clothing or
    an accessory priced well above its category floor, which mirrors how the
    live model reads advertising copy without ever exposing hidden tiers.
    """

    is_stub = True

    def __init__(self, params: Optional[StubParams] = None,
                 priors: Optional[dict] = None):
        self.params = params or StubParams()
        self.priors = priors or {}

    def complete(self, request: BackendRequest) -> BackendResponse:
        purpose = request.purpose
        meta = request.meta
        if purpose == "situation":
            return BackendResponse(f"This looks like a situation about {meta.get('topic', 'everyday life')}.")
        if purpose == "identity":
            return BackendResponse("I am someone who pays attention to what people like me do.")
        if purpose == "action":
            return BackendResponse("A person like me weighs what they have seen others do, then acts naturally.")
        if purpose == "choice":
            return BackendResponse(self._choose(request))
        if purpose == "consumer":
            return BackendResponse(self._consumer(meta))
        if purpose == "utterance":
            return BackendResponse(self._utterance(meta))
        if purpose == "reflection":
            return BackendResponse(self._reflection(meta))
        if purpose == "scenario_gen":
            return BackendResponse(self._scenario_gen(meta))
        return BackendResponse("Understood.")

    # -- choice ------------------------------------------------------------

    def _choose(self, request: BackendRequest) -> str:
        meta = request.meta
        options = meta["options"]  # list of {"id": ..., "signal_class": ...}
        rng: random.Random = meta["rng"]
        counts: dict[str, int] = meta.get("signal_counts", {})
        p = self.params
        beta0 = meta.get("beta0", p.beta0)
        beta1 = meta.get("beta1", p.beta1)
        if len(options) == 1:
            return options[0]["id"]
        status = [o for o in options if o["signal_class"] == "StatusSignal"]
        noaction = [o for o in options if o["signal_class"] == "NoAction"]
        if len(status) == 1 and noaction:
            s = status[0]
            if rng.random() < stub_signal_probability(counts.get(s["id"], 0), beta0, beta1):
                return s["id"]
            neutrals = [o for o in options if o["signal_class"] == "Neutral"]
            if neutrals and rng.random() < p.neutral_share:
                return neutrals[0]["id"]
            return noaction[0]["id"]
        # Marker domains (several equivalent signals): cultural prior times
        # the exponential weight of precedent.
        priors = meta.get("priors") or {}
        weights = []
        for o in options:
            prior = float(priors.get(o["id"], 1.0))
            weights.append(prior * math.exp(beta1 * counts.get(o["id"], 0)))
        total = sum(weights)
        r = rng.random() * total
        acc = 0.0
        for o, w in zip(options, weights):
            acc += w
            if r <= acc:
                return o["id"]
        return options[-1]["id"]

    # -- consumer ----------------------------------------------------------

    def _consumer(self, meta: dict) -> str:
        goods = meta["goods"]  # [{"id","category","base_price","ask"}]
        rng: random.Random = meta["rng"]
        counts: dict[str, int] = meta.get("signal_counts", {})
        tol = float(meta.get("tolerance", 2.5))
        budget = float(meta["cash"])
        p = self.params
        lines: list[str] = []

        cat_floor: dict[str, float] = {}
        for g in goods:
            c = g["category"]
            cat_floor[c] = min(cat_floor.get(c, float("inf")), g["base_price"])

        # Food: a hungry larder forces a bid; otherwise restocking is a habit.
        if meta.get("foodless") or rng.random() < p.food_habit:
            foods = [g for g in goods
                     if g["category"] == "Food" and g["ask"] <= tol * g["base_price"]
                     and g["ask"] <= budget]
            if foods:
                pick = rng.choice(foods)
                wtp = min(pick["ask"], budget)
                lines.append(f"{pick['id']}, {wtp:.2f}, 1")
                budget -= wtp

        owned = set(meta.get("owned", ()))
        others = [g for g in goods if g["category"] != "Food"]
        for g in rng.sample(others, len(others)):
            discretionary = budget - p.cash_reserve
            if discretionary <= 0:
                break
            m = counts.get(g["id"], 0)
            pricey = g["base_price"] > 3 * cat_floor[g["category"]]
            status_like = g["category"] in ("Clothing", "Accessories") and pricey
            beta0 = p.bid_beta0_status if status_like else p.bid_beta0_functional
            if g["id"] in owned:
                beta0 -= p.ownership_penalty
            # Prudence: a cold purchase uses at most budget_frac of the free
            # purse; accumulated social proof unlocks splurging. Never bid
            # below the asking price or into the survival reserve.
            cap = discretionary * min(1.0, p.budget_frac * (1 + p.hype_relax * m))
            if g["ask"] > cap:
                continue
            if g["ask"] > tol * g["base_price"] * (1 + p.hype_relax * m):
                continue
            if rng.random() >= stub_signal_probability(m, beta0, meta.get("bid_beta1", p.bid_beta1)):
                continue
            wtp = min(g["ask"] * (1 + p.hype_markup * m), discretionary)
            lines.append(f"{g['id']}, {wtp:.2f}, 1")
            budget -= wtp
        return "\n".join(lines) if lines else "NONE"

    # -- conversation ------------------------------------------------------

    def _utterance(self, meta: dict) -> str:
        rng: random.Random = meta["rng"]
        p = self.params
        if meta.get("is_influencer") and meta.get("influencer_items"):
            if rng.random() < p.influencer_mention_prob:
                item = rng.choice(list(meta["influencer_items"]))
                return rng.choice(_INFLUENCER_LINES).format(item=item)
            return rng.choice(_SMALL_TALK)
        mention_prob = meta.get("mention_prob", p.mention_prob)
        # Candidates are (name, kind, distinctive?, times already mentioned).
        # Plain items draw far less comment, repetition wears a topic out, and
        # hot goods get gossiped about whether or not anyone here is wearing one.
        candidates = []
        if meta.get("partner_item"):
            candidates.append(("partner", meta["partner_item"],
                               meta.get("partner_item_noteworthy", False),
                               meta.get("partner_item_mentions", 0)))
        for it in meta.get("own_items", ()):
            candidates.append(("own", it["name"], it.get("noteworthy", False),
                               it.get("mentions", 0)))
        for it in meta.get("hot_items", ()):
            candidates.append(("gossip", it["name"], True, it.get("mentions", 0)))
        if candidates:
            partner_cands = [c for c in candidates if c[0] == "partner"]
            gossip_cands = [c for c in candidates if c[0] == "gossip"]
            own_cands = [c for c in candidates if c[0] == "own"]
            u = rng.random()
            if partner_cands and u < 0.45:
                pick = partner_cands[0]
            elif gossip_cands and u < 0.75:
                pick = rng.choice(gossip_cands)
            elif own_cands:
                pick = rng.choice(own_cands)
            else:
                pick = rng.choice(candidates)
            kind, name, noteworthy, mentions = pick
            prob = mention_prob * (1.0 if noteworthy else 0.15)
            prob *= 1.0 if mentions == 0 else (0.4 if mentions < 3 else 0.08)
            if rng.random() < prob:
                if kind == "partner":
                    return rng.choice(_COMPLIMENT_LINES).format(item=name)
                if kind == "gossip":
                    return rng.choice(_GOSSIP_LINES).format(item=name)
                return rng.choice(_SELF_MENTION_LINES).format(item=name)
        return rng.choice(_SMALL_TALK)

    def _reflection(self, meta: dict) -> str:
        items = meta.get("mentioned_items") or []
        partner = meta.get("partner_name", "my date")
        if items:
            return _REFLECTION_WITH_ITEMS.format(partner=partner, items=" and ".join(items))
        return _REFLECTION_PLAIN.format(partner=partner)

    def _scenario_gen(self, meta: dict) -> str:
        rng: random.Random = meta["rng"]
        library = meta["library"]
        clone = json.loads(json.dumps(rng.choice(library)))
        clone["scenario_id"] = f"{clone['scenario_id']}_gen{rng.randrange(10_000)}"
        return json.dumps(clone)


# ---------------------------------------------------------------------------
# Operations over a backend


def _emit_backend_call(emit: Optional[EmitFn], actor: str, purpose: str,
                       request: BackendRequest, response_text: str,
                       fallback: bool = False) -> None:
    if emit is None:
        return
    payload = {
        "actor": actor,
        "purpose": purpose,
        "prompt": request.prompt,
        "choice_set": request.choice_set,
        "response": response_text,
        "meta": loggable_meta(request.meta),
    }
    if fallback:
        payload["fallback"] = True
    emit("backend_call", payload)


def _match_choice(text: str, options: Sequence[DecisionOption]) -> Optional[str]:
    """Tolerant matching of a backend reply onto an option id."""
    cand = text.strip().strip(".\"'")
    if not cand:
        return None
    for o in options:
        if cand == o.option_id or cand.lower() == o.option_id.lower():
            return o.option_id
    for o in options:
        if cand.lower() == o.text.strip().lower():
            return o.option_id
    if cand.isdigit():
        idx = int(cand) - 1
        if 0 <= idx < len(options):
            return options[idx].option_id
    return None


def decide(
    agent,
    ctx: DecisionContext,
    backend: Backend,
    emit: Optional[EmitFn] = None,
    templates: Optional[dict[str, str]] = None,
    priors: Optional[dict[str, float]] = None,
    beta_overrides: Optional[dict[str, float]] = None,
) -> str:
    """Run the three appropriateness prompts, then a constrained choice over
    ``ctx.options``. Returns the chosen option id; logs all four exchanges.

    An out-of-set constrained reply earns one reprompt, then a deterministic
    fallback to the NoAction option (or the first option), logged as such.
    """
    templates = templates or load_templates()
    persona = agent.persona
    memories = format_memories(ctx.retrieved_memories)
    counts = {o.option_id: agent.memory.signal_count(o.option_id) for o in ctx.options}
    base_meta: dict = {"topic": ctx.situation_text[:60]}
    if beta_overrides:
        base_meta.update(beta_overrides)

    answers: dict[str, str] = {}
    steps = [
        ("situation", render(templates["situation"], persona_name=persona.name,
                             persona_background=persona.background,
                             memories=memories, situation=ctx.situation_text)),
    ]
    resp = backend.complete(BackendRequest(prompt=steps[0][1], purpose="situation", meta=dict(base_meta)))
    _emit_backend_call(emit, agent.agent_id, "situation", BackendRequest(prompt=steps[0][1], purpose="situation"), resp.text)
    answers["situation"] = resp.text

    prompt = render(templates["identity"], persona_name=persona.name,
                    persona_background=persona.background,
                    situation_answer=answers["situation"])
    resp = backend.complete(BackendRequest(prompt=prompt, purpose="identity", meta=dict(base_meta)))
    _emit_backend_call(emit, agent.agent_id, "identity", BackendRequest(prompt=prompt, purpose="identity"), resp.text)
    answers["identity"] = resp.text

    prompt = render(templates["action"], persona_name=persona.name,
                    situation_answer=answers["situation"],
                    identity_answer=answers["identity"])
    resp = backend.complete(BackendRequest(prompt=prompt, purpose="action", meta=dict(base_meta)))
    _emit_backend_call(emit, agent.agent_id, "action", BackendRequest(prompt=prompt, purpose="action"), resp.text)
    answers["action"] = resp.text

    options_text = "\n".join(f"- {o.option_id}: {o.text}" for o in ctx.options)
    option_ids = [o.option_id for o in ctx.options]
    prompt = render(templates["choice"], persona_name=persona.name,
                    situation_answer=answers["situation"],
                    identity_answer=answers["identity"],
                    action_answer=answers["action"],
                    options=options_text, option_ids=", ".join(option_ids))
    meta = dict(base_meta)
    meta.update({
        "options": [{"id": o.option_id, "signal_class": o.signal_class} for o in ctx.options],
        "signal_counts": counts,
        "rng": agent.rng,
        "priors": priors or {},
    })
    request = BackendRequest(prompt=prompt, purpose="choice", choice_set=option_ids, meta=meta)
    resp = backend.complete(request)
    chosen = _match_choice(resp.text, ctx.options)
    _emit_backend_call(emit, agent.agent_id, "choice", request, resp.text)
    if chosen is None:
        reprompt = prompt + "\n\nYour previous reply was not a valid option id. " \
                            "Reply with exactly one id from the list."
        request2 = BackendRequest(prompt=reprompt, purpose="choice", choice_set=option_ids, meta=meta)
        resp2 = backend.complete(request2)
        chosen = _match_choice(resp2.text, ctx.options)
        _emit_backend_call(emit, agent.agent_id, "choice", request2, resp2.text)
        if chosen is None:
            fallback = next((o.option_id for o in ctx.options if o.signal_class == "NoAction"),
                            ctx.options[0].option_id)
            if emit is not None:
                emit("choice_fallback", {"actor": agent.agent_id, "chosen": fallback,
                                         "raw_response": resp2.text})
            chosen = fallback
    return chosen


_BID_LINE = re.compile(r"^\s*(?P<item>[^,]+?)\s*,\s*\$?(?P<price>\d+(?:\.\d+)?)\s*(?:,\s*(?P<qty>\d+))?\s*$")


def _parse_bid_lines(text: str, goods_by_key: dict[str, str]) -> Optional[list[tuple[str, float, int]]]:
    """Parse "ITEM, PRICE, QTY" lines; None means unparseable (reprompt)."""
    stripped = text.strip()
    if not stripped or stripped.upper() == "NONE":
        return []
    bids = []
    any_line = False
    for line in stripped.splitlines():
        if not line.strip():
            continue
        any_line = True
        m = _BID_LINE.match(line)
        if not m:
            continue
        key = m.group("item").strip().lower()
        good_id = goods_by_key.get(key)
        if good_id is None:
            continue
        price = float(m.group("price"))
        qty = int(m.group("qty") or 1)
        if price <= 0 or qty < 1:
            continue
        bids.append((good_id, price, qty))
    if any_line and not bids:
        return None
    return bids


def consumer_evaluate(
    agent,
    catalog_view: Sequence[tuple],
    backend: Backend,
    emit: Optional[EmitFn] = None,
    templates: Optional[dict[str, str]] = None,
    retrieval_k: int = 20,
) -> list[tuple[str, float, int]]:
    """Ask the backend which goods to bid on and at what willingness to pay.

    ``catalog_view`` holds (good, current best ask) pairs. The returned bids
    never sum above the agent's cash; unparseable output earns one reprompt,
    then the agent simply sits the round out.
    """
    if agent.cash <= 0:
        return []
    templates = templates or load_templates()
    goods = [g for g, _ in catalog_view]
    offers = "\n".join(
        f"{g.id} | {g.visible_text} | current ask ${ask:.2f}" for g, ask in catalog_view
    )
    memories = retrieve_memories(agent.memory, [g.id for g in goods], retrieval_k)
    prompt = render(templates["consumer"], persona_name=agent.persona.name,
                    persona_background=agent.persona.background, cash=agent.cash,
                    memories=format_memories(memories), offers=offers)
    meta = {
        "goods": [
            {"id": g.id, "category": g.category, "base_price": g.base_price, "ask": ask}
            for g, ask in catalog_view
        ],
        "cash": agent.cash,
        "foodless": not agent.holds_any(g.id for g in goods if g.category == "Food"),
        "tolerance": agent.price_tolerance,
        "signal_counts": {g.id: agent.memory.signal_count(g.id) for g in goods},
        "owned": sorted(gid for gid, qty in agent.inventory.items() if qty > 0),
        "rng": agent.rng,
    }
    request = BackendRequest(prompt=prompt, purpose="consumer", max_length=200, meta=meta)
    resp = backend.complete(request)
    _emit_backend_call(emit, agent.agent_id, "consumer", request, resp.text)

    keys: dict[str, str] = {}
    for g in goods:
        keys[g.id.lower()] = g.id
        keys[g.name.lower()] = g.id
    bids = _parse_bid_lines(resp.text, keys)
    if bids is None:
        reprompt = prompt + "\n\nReply ONLY with lines in the format ITEM_ID, PRICE, QTY or the word NONE."
        request2 = BackendRequest(prompt=reprompt, purpose="consumer", max_length=200, meta=meta)
        resp2 = backend.complete(request2)
        _emit_backend_call(emit, agent.agent_id, "consumer", request2, resp2.text)
        bids = _parse_bid_lines(resp2.text, keys)
        if bids is None:
            if emit is not None:
                emit("consumer_parse_failure", {"actor": agent.agent_id, "raw_response": resp2.text})
            return []

    budget = agent.cash
    accepted = []
    for good_id, wtp, qty in bids:
        if wtp * qty <= budget + 1e-9:
            accepted.append((good_id, wtp, qty))
            budget -= wtp * qty
    return accepted


def reflect(
    agent,
    episode_transcript: Sequence[tuple[str, str]],
    backend: Backend,
    catalog: Sequence,
    partner_id: str,
    partner_name: str = "",
    day: int = 0,
    phase: int = 3,
    emit: Optional[EmitFn] = None,
    templates: Optional[dict[str, str]] = None,
) -> MemoryRecord:
    """Summarize a date into one Reflection record tagged with the partner and
    every catalog item named in the transcript."""
    if not episode_transcript:
        raise ContractViolation("cannot reflect on an empty transcript")
    templates = templates or load_templates()
    text = "\n".join(f"{speaker}: {utt}" for speaker, utt in episode_transcript)
    mentioned = find_catalog_mentions(text, catalog)
    names = sorted(g.name for g in catalog if g.id in mentioned)
    prompt = render(templates["reflection"], persona_name=agent.persona.name,
                    partner_name=partner_name or partner_id, transcript=text[-4000:])
    request = BackendRequest(prompt=prompt, purpose="reflection", max_length=160,
                             meta={"partner_name": partner_name or partner_id,
                                   "mentioned_items": names})
    resp = backend.complete(request)
    _emit_backend_call(emit, agent.agent_id, "reflection", request, resp.text)
    record = agent.memory.add(day, phase, "Reflection", resp.text,
                              tags=set(mentioned) | {partner_id})
    if emit is not None:
        emit("reflection", {"agent_id": agent.agent_id, "text": resp.text,
                            "tags": sorted(set(mentioned) | {partner_id})})
    return record
