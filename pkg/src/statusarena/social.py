"""Daily social life: dyad scheduling, date openings, and conversations.

Pairings come from a circle-method round robin of one sex group against the
other, so nobody meets the same partner twice and every dyad is mixed-sex.
A date opens with each agent observing one item sampled from the partner's
visible inventory (clothing and accessories); that observation lands in the
observer's memory tagged with the good, which is the diffusion mechanism the
whole experiment turns on. Conversations alternate speakers up to the turn
budget and are tagged by verbatim catalog-name matching, so the analytics can
audit exactly which mentions spread which goods.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .backends import Backend, BackendRequest, load_templates, render
from .cognition import (
    EmitFn,
    find_catalog_mentions,
    format_memories,
    retrieve_memories,
)
from .events import ConfigError

VISIBLE_CATEGORIES = ("Clothing", "Accessories")

FALLBACK_ATTIRE = "a plain outfit"

DEFAULT_LOCATIONS = (
    "a quiet espresso bar in the arts district",
    "a sunlit park by the lake",
    "a small gallery opening downtown",
    "a tapas place with mismatched chairs",
    "a rooftop lounge with string lights",
    "a secondhand bookshop cafe",
    "a ramen counter tucked into an alley",
    "a botanical garden conservatory",
)


@dataclass
class PairingSchedule:
    """day (1-based) -> list of (agent_id, agent_id) dyads."""

    days: dict[int, list[tuple[str, str]]] = field(default_factory=dict)

    def dyads_for(self, day: int) -> list[tuple[str, str]]:
        return self.days.get(day, [])

    def all_dyads(self) -> list[tuple[str, str]]:
        out = []
        for day in sorted(self.days):
            out.extend(self.days[day])
        return out


@dataclass
class DateTranscript:
    dyad: tuple[str, str]
    location: str
    opening_observations: tuple[str, str]
    turns: list[tuple[str, str]] = field(default_factory=list)  # (speaker_id, utterance)


def schedule_pairings(agents: Sequence, n_days: int, seed: int) -> PairingSchedule:
    """Round-robin rotation of the two sex groups, offset by day.

    Needs equal groups of size >= n_days so a repeat-free rotation exists.
    """
    males = [a.agent_id for a in agents if a.persona.sex == "M"]
    females = [a.agent_id for a in agents if a.persona.sex == "F"]
    if len(males) != len(females):
        raise ConfigError(f"sex groups must be equal for pairing: {len(males)}M vs {len(females)}F")
    if not males:
        raise ConfigError("cannot schedule pairings for an empty population")
    if n_days > len(males):
        raise ConfigError(
            f"{n_days} days exceeds group size {len(males)}; partners would repeat"
        )
    rng = random.Random(f"pairings/{seed}")
    rng.shuffle(males)
    rng.shuffle(females)
    n = len(males)
    schedule = PairingSchedule()
    for day in range(1, n_days + 1):
        offset = day - 1
        schedule.days[day] = [(males[i], females[(i + offset) % n]) for i in range(n)]
    return schedule


def visible_inventory(agent, goods_by_id: dict) -> list[str]:
    """Good ids the partner can see on this agent (clothing and accessories)."""
    out = []
    for good_id, qty in sorted(agent.inventory.items()):
        good = goods_by_id.get(good_id)
        if good is not None and qty > 0 and good.category in VISIBLE_CATEGORIES:
            out.append(good_id)
    return out


def open_date(
    dyad: tuple,
    goods_by_id: dict,
    rng: random.Random,
    locations: Sequence[str] = DEFAULT_LOCATIONS,
    day: int = 0,
    emit: Optional[EmitFn] = None,
) -> tuple[str, tuple[str, str], dict]:
    """Start a date: pick a location and give each agent one observation of
    what the partner is wearing, sampled uniformly from the partner's visible
    inventory. Observations append to the observer's memory tagged with the
    good. Returns (location, both observation texts, sampled item per agent).
    """
    a, b = dyad
    location = rng.choice(list(locations))
    sampled: dict[str, Optional[str]] = {}
    texts = []
    for observer, wearer in ((a, b), (b, a)):
        visible = visible_inventory(wearer, goods_by_id)
        if visible:
            good_id = rng.choice(visible)
            item_name = goods_by_id[good_id].name
            tags = {good_id}
        else:
            good_id = None
            item_name = FALLBACK_ATTIRE
            tags = set()
        sampled[wearer.agent_id] = good_id
        text = f"You are at {location}. {wearer.persona.name} is wearing a {item_name}."
        observer.memory.add(day, 3, "PublicEffect", text, tags=tags)
        texts.append(text)
        if emit is not None:
            emit("observation", {
                "agent_id": observer.agent_id, "kind": "PublicEffect",
                "text": text, "tags": sorted(tags),
            })
    if emit is not None:
        emit("date_opened", {
            "dyad": [a.agent_id, b.agent_id], "location": location,
            "observations": texts,
        })
    return location, (texts[0], texts[1]), sampled


def run_conversation(
    dyad: tuple,
    turn_budget: int,
    backend: Backend,
    goods_by_id: dict,
    location: str,
    opening_observations: tuple[str, str],
    sampled_items: dict,
    rng: random.Random,
    day: int = 0,
    emit: Optional[EmitFn] = None,
    templates: Optional[dict[str, str]] = None,
    mention_prob: Optional[float] = None,
    window: int = 6,
    retrieval_k: int = 6,
) -> DateTranscript:
    """Alternate utterances up to the turn budget (counted across both
    speakers). Every utterance is appended to both memory streams as a
    Conversation record tagged with any catalog item named verbatim."""
    templates = templates or load_templates()
    a, b = dyad
    transcript = DateTranscript(dyad=(a.agent_id, b.agent_id), location=location,
                                opening_observations=opening_observations)
    if turn_budget <= 0:
        return transcript
    goods = list(goods_by_id.values())
    cat_floor: dict[str, float] = {}
    for g in goods:
        cat_floor[g.category] = min(cat_floor.get(g.category, float("inf")), g.base_price)

    def noteworthy(good_id: str) -> bool:
        good = goods_by_id[good_id]
        return (good.category in VISIBLE_CATEGORIES
                and good.base_price > 3 * cat_floor[good.category])

    mention_counts: dict[str, int] = {}
    first, second = (a, b) if rng.random() < 0.5 else (b, a)
    opening_by_agent = {a.agent_id: opening_observations[0], b.agent_id: opening_observations[1]}
    for turn in range(turn_budget):
        speaker = first if turn % 2 == 0 else second
        partner = second if turn % 2 == 0 else first
        recent = transcript.turns[-window:]
        transcript_text = "\n".join(f"{s}: {u}" for s, u in recent) or "(the date just started)"
        memories = retrieve_memories(speaker.memory, set(speaker.inventory), retrieval_k)
        prompt = render(
            templates["utterance"],
            persona_name=speaker.persona.name,
            persona_background=speaker.persona.background,
            partner_name=partner.persona.name,
            location=location,
            opening=opening_by_agent[speaker.agent_id],
            memories=format_memories(memories),
            transcript=transcript_text,
        )
        partner_item_id = sampled_items.get(partner.agent_id)
        meta = {
            "turn_index": turn,
            "rng": speaker.rng,
            "partner_name": partner.persona.name,
            "partner_item": goods_by_id[partner_item_id].name if partner_item_id else None,
            "partner_item_noteworthy": noteworthy(partner_item_id) if partner_item_id else False,
            "partner_item_mentions": mention_counts.get(partner_item_id, 0) if partner_item_id else 0,
            "own_items": [
                {"name": goods_by_id[g].name, "noteworthy": noteworthy(g),
                 "mentions": mention_counts.get(g, 0)}
                for g in visible_inventory(speaker, goods_by_id)
            ],
            "hot_items": [
                {"name": goods_by_id[g].name, "mentions": mention_counts.get(g, 0)}
                for g in _hot_goods(speaker, goods_by_id, noteworthy)
            ],
            "is_influencer": getattr(speaker, "is_influencer", False),
            "influencer_items": [
                goods_by_id[g].name for g in sorted(speaker.inventory)
                if getattr(speaker, "is_influencer", False) and g in goods_by_id
                and goods_by_id[g].pack in ("Hipster", "Streetwear")
            ],
        }
        if mention_prob is not None:
            meta["mention_prob"] = mention_prob
        request = BackendRequest(prompt=prompt, purpose="utterance", max_length=80, meta=meta)
        resp = backend.complete(request)
        utterance = resp.text.strip()
        transcript.turns.append((speaker.agent_id, utterance))
        tags = find_catalog_mentions(utterance, goods)
        for gid in tags:
            mention_counts[gid] = mention_counts.get(gid, 0) + 1
        line = f"{speaker.persona.name}: {utterance}"
        for participant in (a, b):
            participant.memory.add(day, 3, "Conversation", line, tags=tags)
        if emit is not None:
            emit("utterance", {
                "dyad": [a.agent_id, b.agent_id], "speaker": speaker.agent_id,
                "turn_index": turn, "text": utterance, "tags": sorted(tags),
                "prompt": prompt,
            })
    if emit is not None:
        emit("date_transcript", {
            "dyad": [a.agent_id, b.agent_id], "location": location,
            "n_turns": len(transcript.turns),
        })
    return transcript
