"""Experiment runner: the daily cycle, conditions, snapshots, and batches.

A run initializes a world from (config, seed) and steps through days of three
phases: market rounds, private daily-life events with food consumption, and
the social phase (scenario choices, then first dates). Condition flags gate
the phases: the no-social control runs the same total number of market rounds
with phases two and three disabled, the fixed-price control pins every ask to
its base price, and the synthetic-goods control swaps the brand pack.

Everything is driven by named, seeded RNG streams, and a snapshot captures
the complete world state (agents, memories, sellers, schedules, RNG states,
and the event prefix), so a rehydrated run continues byte-identically.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .backends import LiveBackend, load_templates, template_hash
from .catalog import (
    AgentState,
    Good,
    Persona,
    WealthMix,
    build_catalog,
    goods_by_id,
    init_population,
    load_catalog_file,
    validate_catalog,
)
from .cognition import MemoryStream, StubBackend, StubParams, consumer_evaluate, reflect
from .events import (
    PHASE_DAILY,
    PHASE_INIT,
    PHASE_MARKET,
    PHASE_SOCIAL,
    BackendError,
    ConfigError,
    EventLog,
)
from .market import ClearingResult, Order, SellerState, clear_round, settle, update_seller_ask
from .scenarios import broadcast_public_effects, load_library, resolve_scenario
from .social import PairingSchedule, open_date, run_conversation, schedule_pairings
from importlib import resources

INFLUENCER_PACKS = ("Hipster", "Streetwear")

_DAILY_EVENT_TEMPLATES = (
    "{name} worked a long shift and handled a dozen small problems.",
    "{name} ran errands across town between appointments.",
    "{name} caught up on calls with family in the evening.",
    "{name} squeezed in a workout before the day got away.",
    "{name} spent an hour untangling paperwork that should have taken five minutes.",
    "{name} helped a neighbor carry groceries up the stairs.",
    "{name} took the long way home and enjoyed the quiet.",
    "{name} stayed late to finish a project that finally came together.",
    "{name} got caught in traffic and listened to half a podcast.",
    "{name} tidied the apartment and found things long thought lost.",
    "{name} met a coworker for a quick lunch near the office.",
    "{name} fixed a small thing at home that had been broken for weeks.",
)

_INFLUENCER_FIRST = ["Juniper", "Atlas", "Wren", "Silas", "Indigo", "Marlow",
                     "Sage", "Arlo", "Briar", "Lennox", "Vesper", "Callum"]
_INFLUENCER_LAST = ["Hale", "Vos", "Mercer", "Lune", "Ashby", "Roane",
                    "Falk", "Novak", "Quill", "Stone", "Mara", "Iver"]


@dataclass
class ExperimentConfig:
    """Complete, hashable description of one experiment arm."""

    # Condition flags
    social: bool = True
    fixed_price: bool = False
    synthetic_goods: bool = False
    scenario_domain: Optional[str] = None
    population: str = "LosAngeles"
    personal_events: bool = False  # daily-life events in no-social runs (third baseline)

    # Scale
    n_agents: int = 50
    n_days: int = 5
    market_rounds_per_day: int = 5
    n_seeds: int = 10
    turn_budget: int = 80

    # Backend
    backend: str = "stub"  # "stub" | "live"
    backend_retries: int = 2

    # Data paths (None -> shipped defaults)
    catalog_path: Optional[str] = None
    persona_path: Optional[str] = None

    # Market
    sellers_per_good: int = 1
    # Units per good per seller per day; None uses each good's catalog value.
    seller_inventory: Optional[int] = None
    delta_up: float = 0.25
    delta_down: float = 0.10
    ask_floor_frac: float = 0.2

    # Wealth
    wealth_poor_weight: float = 0.8
    wealth_poor_location: float = 500.0
    wealth_rich_location: float = 150_000.0
    wealth_dispersion: float = 0.5
    tolerance_median: float = 2.5
    tolerance_dispersion: float = 0.35

    # Cognition / stub
    retrieval_k: int = 20
    beta0: float = -1.5
    beta1: float = 0.5
    bid_beta0_status: float = -3.8
    bid_beta0_functional: float = -1.9
    ownership_penalty: float = 2.5
    bid_beta1: float = 1.3
    budget_frac: float = 0.45
    cash_reserve: float = 120.0
    food_habit: float = 0.3
    hype_markup: float = 0.1
    hype_relax: float = 0.5
    neutral_share: float = 0.05
    mention_prob: float = 0.18
    influencer_mention_prob: float = 0.5
    conversation_window: int = 6

    # Social
    scenario_effects_in_opening: bool = True

    # Influencer intervention
    influencer_pack: Optional[str] = None
    influencer_start_day: int = 6
    influencer_count: int = 10
    extension_days: int = 5
    influencer_dates_replace: bool = False

    # Snapshots: write one after each listed day (needs an out dir)
    snapshot_days: tuple[int, ...] = ()

    def validate(self) -> None:
        if self.n_agents <= 0 or self.n_agents % 2:
            raise ConfigError(f"n_agents must be positive and even, got {self.n_agents}")
        if self.n_days <= 0:
            raise ConfigError(f"n_days must be positive, got {self.n_days}")
        if self.market_rounds_per_day < 0:
            raise ConfigError("market_rounds_per_day cannot be negative")
        if self.fixed_price and self.market_rounds_per_day == 0:
            raise ConfigError("fixed_price requires a marketplace (market_rounds_per_day > 0)")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be at least 1")
        if self.backend not in ("stub", "live"):
            raise ConfigError(f"backend must be 'stub' or 'live', got {self.backend!r}")
        if self.population not in ("LosAngeles", "Kerala"):
            raise ConfigError(f"unknown population {self.population!r}")
        if self.scenario_domain is not None and self.scenario_domain not in (
                "Political", "Charity", "Banner", "Coffee"):
            raise ConfigError(f"unknown scenario domain {self.scenario_domain!r}")
        if self.influencer_pack is not None:
            if self.influencer_pack not in INFLUENCER_PACKS:
                raise ConfigError(f"influencer pack must be one of {INFLUENCER_PACKS}")
            if self.influencer_start_day != self.n_days + 1:
                raise ConfigError(
                    "influencer_start_day must be n_days + 1 for a continuous run; "
                    "use a snapshot and `rehydrate --inject` for later starts"
                )
            if self.influencer_count * self.extension_days < self.n_agents:
                raise ConfigError(
                    "influencer_count * extension_days must cover every regular agent"
                )
            if self.influencer_count % 2:
                raise ConfigError("influencer_count must be even (mixed-sex dyads)")
        if self.turn_budget < 0:
            raise ConfigError("turn_budget cannot be negative")
        WealthMix(self.wealth_poor_weight, self.wealth_poor_location,
                  self.wealth_rich_location, self.wealth_dispersion)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["snapshot_days"] = list(self.snapshot_days)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        raw = dict(raw)
        if "snapshot_days" in raw:
            raw["snapshot_days"] = tuple(raw["snapshot_days"])
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def wealth_mix(self) -> WealthMix:
        return WealthMix(self.wealth_poor_weight, self.wealth_poor_location,
                         self.wealth_rich_location, self.wealth_dispersion)

    def stub_params(self) -> StubParams:
        return StubParams(
            beta0=self.beta0, beta1=self.beta1,
            bid_beta0_status=self.bid_beta0_status,
            bid_beta0_functional=self.bid_beta0_functional,
            bid_beta1=self.bid_beta1,
            ownership_penalty=self.ownership_penalty,
            budget_frac=self.budget_frac,
            cash_reserve=self.cash_reserve,
            food_habit=self.food_habit,
            hype_markup=self.hype_markup, hype_relax=self.hype_relax,
            neutral_share=self.neutral_share, mention_prob=self.mention_prob,
            influencer_mention_prob=self.influencer_mention_prob,
        )


def load_config_file(path: str | Path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


def _load_stub_priors() -> dict:
    path = resources.files("statusarena").joinpath("data").joinpath("stub_priors.json")
    return json.loads(path.read_text(encoding="utf-8"))


def _load_locations() -> list[str]:
    path = resources.files("statusarena").joinpath("data").joinpath("locations.json")
    return json.loads(path.read_text(encoding="utf-8"))


def _rng_state_to_json(rng: random.Random) -> list:
    version, internal, gauss = rng.getstate()
    return [version, list(internal), gauss]


def _rng_from_state(state: Sequence) -> random.Random:
    rng = random.Random()
    rng.setstate((state[0], tuple(state[1]), state[2]))
    return rng


class Simulation:
    """World state plus the machinery to advance it one day at a time."""

    def __init__(self, config: ExperimentConfig, seed: int,
                 out_dir: Optional[str | Path] = None, _rehydrating: bool = False):
        config.validate()
        self.config = config
        self.seed = seed
        self.out_dir = Path(out_dir) if out_dir else None
        self.run_id = f"{config.config_hash()[:12]}-s{seed:04d}"
        self.templates = load_templates()
        self.locations = _load_locations()
        self.stub_priors = _load_stub_priors()
        self.injected_pack: Optional[str] = None
        self.day_cursor = 1  # next day to run
        self.current_day = 0
        self.current_phase = PHASE_INIT

        if config.backend == "stub":
            self.backend = StubBackend(config.stub_params())
        else:
            self.backend = LiveBackend(retries=config.backend_retries)

        if _rehydrating:
            return  # state arrives from the snapshot

        if config.catalog_path:
            self.catalog = load_catalog_file(config.catalog_path)
        else:
            packs = {"Synthetic"} if config.synthetic_goods else {"Real"}
            self.catalog = build_catalog(packs)
        self.goods = goods_by_id(self.catalog)

        self.agents = init_population(
            config.population, config.n_agents, config.wealth_mix(), seed,
            catalog=self.catalog, persona_path=config.persona_path,
            tolerance_median=config.tolerance_median,
            tolerance_dispersion=config.tolerance_dispersion,
        )
        self.agents_by_id = {a.agent_id: a for a in self.agents}
        self.sellers: dict[str, SellerState] = {}
        for good in sorted(self.catalog, key=lambda g: g.id):
            for s in range(config.sellers_per_good):
                sid = f"seller_{good.id}" if config.sellers_per_good == 1 else f"seller_{good.id}_{s}"
                self.sellers[sid] = SellerState(
                    seller_id=sid, good_id=good.id, current_ask=good.base_price,
                    inventory=0, fixed_price_mode=config.fixed_price,
                    base_price=good.base_price,
                )
        total_days = config.n_days
        if config.influencer_pack:
            total_days += config.extension_days
        self.schedule = (schedule_pairings(self.agents, total_days, seed)
                         if config.social else PairingSchedule())
        self.influencer_dyads: dict[int, list[tuple[str, str]]] = {}

        self.rng_dates = random.Random(f"{seed}/dates")
        self.rng_daily = random.Random(f"{seed}/daily")
        self.rng_market = random.Random(f"{seed}/market")

        self.log = EventLog(self.run_id, seed)
        self._emit_init_events()

    # -- logging helpers ----------------------------------------------------

    def emit(self, kind: str, payload: dict) -> None:
        self.log.append(self.current_day, self.current_phase, kind, payload)

    def _emit_init_events(self) -> None:
        self.emit("run_start", {
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "template_hash": template_hash(),
            "code_version": __version__,
            "catalog": [dataclasses.asdict(g) for g in sorted(self.catalog, key=lambda g: g.id)],
        })
        for a in self.agents:
            self.emit("agent_init", {
                "agent_id": a.agent_id, "persona_name": a.persona.name,
                "sex": a.persona.sex, "population": a.population,
                "cash": a.cash, "inventory": dict(sorted(a.inventory.items())),
                "price_tolerance": a.price_tolerance,
                "is_influencer": a.is_influencer,
            })
        for sid in sorted(self.sellers):
            s = self.sellers[sid]
            self.emit("seller_init", {
                "seller_id": s.seller_id, "good_id": s.good_id,
                "ask": s.current_ask, "inventory_per_day": self.config.seller_inventory or self.goods[s.good_id].initial_inventory,
                "fixed_price_mode": s.fixed_price_mode,
            })

    # -- day loop ------------------------------------------------------------

    def total_days(self) -> int:
        days = self.config.n_days
        if self.config.influencer_pack or self.injected_pack:
            days = self.config.n_days + self.config.extension_days
        return days

    def run(self) -> EventLog:
        while self.day_cursor <= self.total_days():
            if (self.config.influencer_pack and self.injected_pack is None
                    and self.day_cursor == self.config.influencer_start_day):
                inject_influencers(self, self.config.influencer_pack,
                                   self.config.influencer_count)
            self.run_day(self.day_cursor)
        self.current_day = self.total_days()
        self.current_phase = PHASE_INIT
        self.emit("run_end", {"n_events": len(self.log) + 1, "days": self.total_days()})
        if self.out_dir:
            self.log.write_jsonl(self.out_dir / f"{self.run_id}.jsonl")
        return self.log

    def run_day(self, day: int) -> None:
        if day != self.day_cursor:
            raise ConfigError(f"days must run in order; expected {self.day_cursor}, got {day}")
        self.current_day = day

        # Phase 1: marketplace
        self.current_phase = PHASE_MARKET
        self._restock_sellers(day)
        for r in range(self.config.market_rounds_per_day):
            self._run_market_round(day, r)
        if self.config.market_rounds_per_day:
            self._reprice_sellers(day)

        # Phase 2: private daily life events and food consumption
        if self.config.social or self.config.personal_events:
            self.current_phase = PHASE_DAILY
            self._run_daily_events(day)

        # Phase 3: scenario choices (both conditions when a domain is set),
        # then social life (dates) in the social condition only.
        self.current_phase = PHASE_SOCIAL
        partner_of = self._partners_for_day(day) if self.config.social else {}
        if self.config.scenario_domain:
            self._run_scenarios(day, partner_of)
        if self.config.social:
            self._run_dates(day, partner_of)

        self.emit("day_end", {"day": day})
        self.day_cursor = day + 1
        if self.out_dir and day in self.config.snapshot_days:
            path = self.out_dir / f"{self.run_id}-day{day}.snapshot.json"
            save_snapshot(self.take_snapshot(), path)
            self.emit("snapshot_written", {"day": day, "path": path.name})

    # -- phase 1 -------------------------------------------------------------

    def _restock_sellers(self, day: int) -> None:
        for sid in sorted(self.sellers):
            s = self.sellers[sid]
            if self.config.seller_inventory is not None:
                s.start_day(self.config.seller_inventory)
            else:
                s.start_day(self.goods[s.good_id].initial_inventory)
            self.emit("seller_restock", {"seller_id": sid, "good_id": s.good_id,
                                         "inventory": s.inventory, "day": day})

    def _reprice_sellers(self, day: int) -> None:
        """Sellers reprice once per day on the day's aggregate outcome."""
        cfg = self.config
        for sid in sorted(self.sellers):
            s = self.sellers[sid]
            day_result = ClearingResult(
                good_id=s.good_id, clearing_price=None, trades=[],
                best_ask=s.current_ask, best_bid=None,
                executed_volume=s.sold_today)
            s.offered_this_round = s.offered_today
            old = s.current_ask
            update_seller_ask(s, day_result, delta_up=cfg.delta_up,
                              delta_down=cfg.delta_down, floor_frac=cfg.ask_floor_frac)
            reason = "fixed" if s.fixed_price_mode else (
                "sold_out" if s.current_ask > old else
                "no_sales" if s.current_ask < old else "partial")
            self.emit("ask_update", {
                "seller_id": sid, "good_id": s.good_id, "old": old,
                "new": s.current_ask, "reason": reason, "day": day,
                "offered": s.offered_today, "sold": s.sold_today,
            })

    def _catalog_view(self) -> list[tuple[Good, float]]:
        best_ask: dict[str, float] = {}
        for s in self.sellers.values():
            cur = best_ask.get(s.good_id)
            if cur is None or s.current_ask < cur:
                best_ask[s.good_id] = s.current_ask
        return [(self.goods[gid], best_ask[gid]) for gid in sorted(best_ask)]

    def _run_market_round(self, day: int, round_in_day: int) -> None:
        cfg = self.config
        round_global = (day - 1) * cfg.market_rounds_per_day + round_in_day
        self.emit("round_start", {"round_global": round_global, "day": day,
                                  "round_in_day": round_in_day})
        view = self._catalog_view()
        orders: dict[str, list[Order]] = {gid: [] for gid in sorted(self.goods)}
        arrival = 0

        for agent in self.agents:
            if agent.is_influencer:
                continue
            bids = consumer_evaluate(agent, view, self.backend, emit=self.emit,
                                     templates=self.templates, retrieval_k=cfg.retrieval_k)
            committed = 0.0
            for good_id, wtp, qty in bids:
                if committed + wtp * qty > agent.cash + 1e-9:
                    self.emit("order_rejected", {
                        "agent_id": agent.agent_id, "good_id": good_id,
                        "price": wtp, "quantity": qty,
                        "reason": "bids exceed cash this round",
                    })
                    continue
                committed += wtp * qty
                order = Order(agent_id=agent.agent_id, good_id=good_id, side="Bid",
                              price=wtp, quantity=qty, round_index=round_global,
                              arrival_index=arrival)
                arrival += 1
                orders[good_id].append(order)
                self.emit("order_submitted", {
                    "agent_id": agent.agent_id, "good_id": good_id, "side": "Bid",
                    "price": wtp, "quantity": qty, "round_global": round_global,
                    "arrival_index": order.arrival_index,
                })

        for sid in sorted(self.sellers):
            s = self.sellers[sid]
            s.offered_this_round = s.inventory
            if s.inventory < 1:
                continue
            order = Order(agent_id=sid, good_id=s.good_id, side="Ask",
                          price=s.current_ask, quantity=s.inventory,
                          round_index=round_global, arrival_index=arrival)
            arrival += 1
            orders[s.good_id].append(order)
            self.emit("order_submitted", {
                "agent_id": sid, "good_id": s.good_id, "side": "Ask",
                "price": s.current_ask, "quantity": s.inventory,
                "round_global": round_global, "arrival_index": order.arrival_index,
            })

        for gid in sorted(orders):
            book = orders[gid]
            result = clear_round(book) if book else ClearingResult(
                good_id=gid, clearing_price=None, trades=[], best_ask=None,
                best_bid=None, executed_volume=0)
            if not result.good_id:
                result.good_id = gid
            self.emit("clearing", {
                "good_id": gid, "round_global": round_global,
                "clearing_price": result.clearing_price,
                "best_ask": result.best_ask, "best_bid": result.best_bid,
                "executed_volume": result.executed_volume,
                "demand_units": result.demand_units,
                "supply_units": result.supply_units,
            })
            settled = settle(self.agents_by_id, self.sellers, result, emit=self.emit)
            for trade in settled:
                buyer = self.agents_by_id[trade.buyer_id]
                good = self.goods[gid]
                self.sellers[trade.seller_id].sold_today += trade.quantity
                buyer.memory.add(day, PHASE_MARKET, "Market",
                                 f"Bought {good.name} for ${trade.price:.2f}.",
                                 tags={gid})
            if settled:
                total_cash = sum(a.cash for a in self.agents) + \
                    sum(s.revenue for s in self.sellers.values())
                self.emit("settlement", {
                    "good_id": gid, "round_global": round_global,
                    "n_trades": len(settled), "total_cash_after": round(total_cash, 6),
                })

    # -- phase 2 -------------------------------------------------------------

    def _run_daily_events(self, day: int) -> None:
        food_ids = sorted(g.id for g in self.catalog if g.category == "Food")
        for agent in self.agents:
            if agent.is_influencer:
                continue
            for template in self.rng_daily.sample(_DAILY_EVENT_TEMPLATES, 3):
                text = template.format(name=agent.persona.name)
                agent.memory.add(day, PHASE_DAILY, "Observation", text)
                self.emit("observation", {"agent_id": agent.agent_id,
                                          "kind": "Observation", "text": text, "tags": []})
            held = [gid for gid in food_ids if agent.inventory.get(gid, 0) > 0]
            if held:
                agent.remove_item(held[0], 1)
                text = f"{agent.persona.name} consumed one unit of food ({self.goods[held[0]].name})."
                agent.memory.add(day, PHASE_DAILY, "Observation", text)
                self.emit("observation", {"agent_id": agent.agent_id, "kind": "Observation",
                                          "text": text, "tags": [], "food_consumed": held[0]})
            else:
                text = f"{agent.persona.name} is starving and sick from the lack of food."
                agent.memory.add(day, PHASE_DAILY, "Observation", text, tags={"starvation"})
                self.emit("observation", {"agent_id": agent.agent_id, "kind": "Observation",
                                          "text": text, "tags": ["starvation"], "starvation": True})

    # -- phase 3 -------------------------------------------------------------

    def _partners_for_day(self, day: int) -> dict[str, str]:
        partner: dict[str, str] = {}
        dyads = list(self.schedule.dyads_for(day))
        if self.injected_pack and self.config.influencer_dates_replace and day in self.influencer_dyads:
            dyads = []
        dyads += self.influencer_dyads.get(day, [])
        for a, b in dyads:
            partner.setdefault(a, b)
            partner.setdefault(b, a)
        return partner

    def _day_dyads(self, day: int) -> list[tuple[str, str]]:
        dyads = list(self.schedule.dyads_for(day))
        if self.injected_pack and self.config.influencer_dates_replace and day in self.influencer_dyads:
            dyads = []
        return dyads + self.influencer_dyads.get(day, [])

    def _run_scenarios(self, day: int, partner_of: dict[str, str]) -> None:
        library = load_library(self.config.scenario_domain)
        cfg = library[(day - 1) % len(library)]
        priors = self.stub_priors.get(self.config.scenario_domain, {}).get(self.config.population, {})
        outcomes = []
        for agent in self.agents:
            if agent.is_influencer:
                continue
            outcome = resolve_scenario(agent, cfg, self.backend, day=day, emit=self.emit,
                                       priors=priors, retrieval_k=self.config.retrieval_k)
            outcomes.append(outcome)
        if self.config.social:
            for outcome in outcomes:
                partner_id = partner_of.get(outcome.agent_id)
                if partner_id is None:
                    continue
                broadcast_public_effects(outcome, self.agents_by_id[outcome.agent_id],
                                         self.agents_by_id[partner_id], cfg,
                                         day=day, emit=self.emit)

    def _run_dates(self, day: int, partner_of: dict[str, str]) -> None:
        cfg = self.config
        for a_id, b_id in self._day_dyads(day):
            a = self.agents_by_id[a_id]
            b = self.agents_by_id[b_id]
            location, openings, sampled = open_date(
                (a, b), self.goods, self.rng_dates, locations=self.locations,
                day=day, emit=self.emit)
            transcript = run_conversation(
                (a, b), cfg.turn_budget, self.backend, self.goods, location,
                openings, sampled, self.rng_dates, day=day, emit=self.emit,
                templates=self.templates, mention_prob=cfg.mention_prob,
                window=cfg.conversation_window)
            if transcript.turns:
                for agent, partner in ((a, b), (b, a)):
                    reflect(agent, transcript.turns, self.backend, self.catalog,
                            partner_id=partner.agent_id, partner_name=partner.persona.name,
                            day=day, emit=self.emit, templates=self.templates)
            if self.out_dir:
                tdir = self.out_dir / "transcripts"
                tdir.mkdir(parents=True, exist_ok=True)
                lines = [f"Date: day {day}, {a.persona.name} and {b.persona.name} at {location}",
                         openings[0], openings[1], ""]
                lines += [f"{self.agents_by_id[s].persona.name}: {u}" for s, u in transcript.turns]
                (tdir / f"day{day}_{a.agent_id}_{b.agent_id}.txt").write_text(
                    "\n".join(lines) + "\n", encoding="utf-8")

    # -- snapshots -----------------------------------------------------------

    def take_snapshot(self) -> dict:
        agents = []
        for a in self.agents:
            agents.append({
                "agent_id": a.agent_id,
                "persona": {
                    "name": a.persona.name, "sex": a.persona.sex,
                    "background": a.persona.background,
                    "formative_memories": list(a.persona.formative_memories),
                    "population": a.persona.population,
                },
                "cash": a.cash,
                "inventory": dict(sorted(a.inventory.items())),
                "population": a.population,
                "price_tolerance": a.price_tolerance,
                "is_influencer": a.is_influencer,
                "influencer_pack": a.influencer_pack,
                "memory_seq": a.memory._seq,
                "memory": [
                    {"timestamp": list(r.timestamp), "kind": r.kind,
                     "text": r.text, "tags": sorted(r.tags)}
                    for r in a.memory.records
                ],
                "rng_state": _rng_state_to_json(a.rng),
            })
        sellers = []
        for sid in sorted(self.sellers):
            s = self.sellers[sid]
            sellers.append({
                "seller_id": s.seller_id, "good_id": s.good_id,
                "current_ask": s.current_ask, "inventory": s.inventory,
                "fixed_price_mode": s.fixed_price_mode, "base_price": s.base_price,
                "revenue": s.revenue, "offered_today": s.offered_today,
                "sold_today": s.sold_today,
            })
        return {
            "snapshot_version": 1,
            "config": self.config.to_dict(),
            "seed": self.seed,
            "next_day": self.day_cursor,
            "injected_pack": self.injected_pack,
            "schedule": {str(d): [list(p) for p in ps] for d, ps in self.schedule.days.items()},
            "influencer_dyads": {str(d): [list(p) for p in ps]
                                 for d, ps in self.influencer_dyads.items()},
            "agents": agents,
            "sellers": sellers,
            "rng": {
                "dates": _rng_state_to_json(self.rng_dates),
                "daily": _rng_state_to_json(self.rng_daily),
                "market": _rng_state_to_json(self.rng_market),
            },
            "events": self.log.to_dicts(),
        }

    @classmethod
    def rehydrate(cls, snapshot: dict, out_dir: Optional[str | Path] = None) -> "Simulation":
        config = ExperimentConfig.from_dict(snapshot["config"])
        sim = cls(config, snapshot["seed"], out_dir=out_dir, _rehydrating=True)
        packs = {"Synthetic"} if config.synthetic_goods else {"Real"}
        if snapshot.get("injected_pack"):
            packs.add(snapshot["injected_pack"])
        if config.catalog_path:
            sim.catalog = load_catalog_file(config.catalog_path)
            if snapshot.get("injected_pack"):
                sim.catalog = sim.catalog + build_catalog({snapshot["injected_pack"]})
        else:
            sim.catalog = build_catalog(packs)
        sim.goods = goods_by_id(sim.catalog)
        sim.injected_pack = snapshot.get("injected_pack")

        sim.agents = []
        for raw in snapshot["agents"]:
            persona = Persona(
                name=raw["persona"]["name"], sex=raw["persona"]["sex"],
                background=raw["persona"]["background"],
                formative_memories=tuple(raw["persona"]["formative_memories"]),
                population=raw["persona"]["population"],
            )
            memory = MemoryStream(raw["agent_id"])
            for rec in raw["memory"]:
                from .cognition import MemoryRecord
                memory.append(MemoryRecord(timestamp=tuple(rec["timestamp"]),
                                           kind=rec["kind"], text=rec["text"],
                                           tags=frozenset(rec["tags"])))
            memory._seq = raw["memory_seq"]
            agent = AgentState(
                agent_id=raw["agent_id"], persona=persona, cash=raw["cash"],
                inventory=dict(raw["inventory"]), memory=memory,
                population=raw["population"], price_tolerance=raw["price_tolerance"],
                is_influencer=raw["is_influencer"],
                influencer_pack=raw.get("influencer_pack"),
                rng=_rng_from_state(raw["rng_state"]),
            )
            sim.agents.append(agent)
        sim.agents_by_id = {a.agent_id: a for a in sim.agents}

        sim.sellers = {}
        for raw in snapshot["sellers"]:
            sim.sellers[raw["seller_id"]] = SellerState(
                seller_id=raw["seller_id"], good_id=raw["good_id"],
                current_ask=raw["current_ask"], inventory=raw["inventory"],
                fixed_price_mode=raw["fixed_price_mode"], base_price=raw["base_price"],
                revenue=raw["revenue"], offered_today=raw.get("offered_today", 0),
                sold_today=raw.get("sold_today", 0),
            )
        sim.schedule = PairingSchedule(days={
            int(d): [tuple(p) for p in ps] for d, ps in snapshot["schedule"].items()
        })
        sim.influencer_dyads = {
            int(d): [tuple(p) for p in ps]
            for d, ps in snapshot.get("influencer_dyads", {}).items()
        }
        sim.rng_dates = _rng_from_state(snapshot["rng"]["dates"])
        sim.rng_daily = _rng_from_state(snapshot["rng"]["daily"])
        sim.rng_market = _rng_from_state(snapshot["rng"]["market"])
        sim.day_cursor = snapshot["next_day"]
        sim.log = EventLog.from_records(sim.run_id, sim.seed, snapshot["events"])
        return sim


def save_snapshot(snapshot: dict, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(snapshot, fh, sort_keys=True)
        fh.write("\n")
    return path


def load_snapshot(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def inject_influencers(sim: Simulation, pack: str, n_influencers: int) -> Simulation:
    """Add a subculture pack and its confederate influencers at a day boundary.

    New sellers carry the pack goods; influencer agents only converse (no
    buying, selling, or daily events) and each regular agent is scheduled to
    meet at least one influencer during the extension days.
    """
    if pack not in INFLUENCER_PACKS:
        raise ConfigError(f"influencer pack must be one of {INFLUENCER_PACKS}, got {pack!r}")
    pack_goods = build_catalog({pack})
    existing = set(sim.goods)
    for g in pack_goods:
        if g.id in existing:
            raise ConfigError(f"pack good {g.id} already present in catalog")
    if sim.injected_pack:
        raise ConfigError(f"pack {sim.injected_pack} already injected")
    extension_days = sim.config.extension_days
    n_regular = len([a for a in sim.agents if not a.is_influencer])
    if n_influencers * extension_days < n_regular:
        raise ConfigError("not enough influencer dates to reach every regular agent")
    if n_influencers % 2:
        raise ConfigError("influencer_count must be even (mixed-sex dyads)")

    sim.catalog = sim.catalog + pack_goods
    validate_catalog(sim.catalog)
    sim.goods = goods_by_id(sim.catalog)
    sim.injected_pack = pack
    start_day = sim.day_cursor
    sim.emit("influencers_injected", {
        "pack": pack, "n_influencers": n_influencers, "start_day": start_day,
        "goods": [g.id for g in pack_goods],
    })
    for g in sorted(pack_goods, key=lambda x: x.id):
        sid = f"seller_{g.id}"
        sim.sellers[sid] = SellerState(
            seller_id=sid, good_id=g.id, current_ask=g.base_price, inventory=0,
            fixed_price_mode=sim.config.fixed_price, base_price=g.base_price,
        )
        sim.emit("seller_init", {
            "seller_id": sid, "good_id": g.id, "ask": g.base_price,
            "inventory_per_day": sim.config.seller_inventory or g.initial_inventory,
            "fixed_price_mode": sim.config.fixed_price,
        })

    rng = random.Random(f"{sim.seed}/influencers/{pack}")
    items = sorted(g.id for g in pack_goods)
    influencers = []
    for i in range(n_influencers):
        sex = "M" if i % 2 == 0 else "F"
        name = f"{rng.choice(_INFLUENCER_FIRST)} {rng.choice(_INFLUENCER_LAST)}"
        persona = Persona(
            name=name, sex=sex,
            background=(
                f"{name} is a tastemaker with a devoted following, known for championing "
                f"{pack.lower()} pieces and dismissing mainstream designer luxury as "
                f"inauthentic and mass-produced."
            ),
            formative_memories=(
                f"{name} built a reputation by spotting {pack.lower()} culture before it was cool.",
                f"{name} believes taste is shown through authenticity, never through flashy logos.",
            ),
            population=sim.config.population,
        )
        agent = AgentState(
            agent_id=f"influencer_{i:02d}", persona=persona, cash=0.0,
            inventory={gid: 1 for gid in items},
            memory=MemoryStream(f"influencer_{i:02d}"),
            population=sim.config.population, price_tolerance=1.0,
            is_influencer=True, influencer_pack=pack,
            rng=random.Random(f"influencer/{sim.seed}/{i}"),
        )
        for j, text in enumerate(persona.formative_memories):
            agent.memory.add(-1, 0, "Formative", text)
        influencers.append(agent)
        sim.agents.append(agent)
        sim.agents_by_id[agent.agent_id] = agent
        sim.emit("agent_init", {
            "agent_id": agent.agent_id, "persona_name": persona.name, "sex": sex,
            "population": sim.config.population, "cash": 0.0,
            "inventory": dict(sorted(agent.inventory.items())),
            "price_tolerance": 1.0, "is_influencer": True, "pack": pack,
        })

    males = [a for a in influencers if a.persona.sex == "M"]
    females = [a for a in influencers if a.persona.sex == "F"]
    reg_f = [a.agent_id for a in sim.agents if not a.is_influencer and a.persona.sex == "F"]
    reg_m = [a.agent_id for a in sim.agents if not a.is_influencer and a.persona.sex == "M"]
    for e in range(extension_days):
        day = start_day + e
        dyads: list[tuple[str, str]] = []
        for i, inf in enumerate(males):
            dyads.append((inf.agent_id, reg_f[(i * extension_days + e) % len(reg_f)]))
        for i, inf in enumerate(females):
            dyads.append((reg_m[(i * extension_days + e) % len(reg_m)], inf.agent_id))
        sim.influencer_dyads[day] = dyads
    return sim


def run_experiment(config: ExperimentConfig, seed: int,
                   out_dir: Optional[str | Path] = None) -> EventLog:
    """Initialize a world from (config, seed), run every day, return the log.

    On a backend failure the partial state is written out as a resumable
    snapshot (when an output directory is available) before re-raising.
    """
    sim = Simulation(config, seed, out_dir=out_dir)
    try:
        return sim.run()
    except BackendError:
        if out_dir is not None:
            path = Path(out_dir) / f"{sim.run_id}-aborted-day{sim.current_day}.snapshot.json"
            save_snapshot(sim.take_snapshot(), path)
        raise


def run_batch(config: ExperimentConfig, out_dir: str | Path,
              seeds: Optional[Sequence[int]] = None, n_jobs: int = 1) -> dict:
    """Run seeds 0..n_seeds-1 (or the given list), write per-seed logs plus a
    manifest. Individual seed failures are recorded and the batch continues.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed_list = list(seeds) if seeds is not None else list(range(config.n_seeds))
    manifest = {
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "template_hash": template_hash(),
        "code_version": __version__,
        "seeds": seed_list,
        "logs": {},
        "failures": {},
        "status": "incomplete",
    }
    _write_manifest(out_dir, manifest)

    def _one(seed: int):
        log = run_experiment(config, seed, out_dir=None)
        fname = f"{log.run_id}.jsonl"
        log.write_jsonl(out_dir / fname)
        return seed, fname

    if n_jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = {pool.submit(_run_one_seed, config.to_dict(), s, str(out_dir)): s
                       for s in seed_list}
            for fut, seed in futures.items():
                try:
                    manifest["logs"][str(seed)] = fut.result()
                except Exception as exc:
                    manifest["failures"][str(seed)] = str(exc)
    else:
        for seed in seed_list:
            try:
                _, fname = _one(seed)
                manifest["logs"][str(seed)] = fname
            except Exception as exc:
                manifest["failures"][str(seed)] = str(exc)

    manifest["status"] = "complete" if not manifest["failures"] else "partial"
    _write_manifest(out_dir, manifest)
    return manifest


def _run_one_seed(config_dict: dict, seed: int, out_dir: str) -> str:
    config = ExperimentConfig.from_dict(config_dict)
    log = run_experiment(config, seed, out_dir=None)
    fname = f"{log.run_id}.jsonl"
    log.write_jsonl(Path(out_dir) / fname)
    return fname


def _write_manifest(out_dir: Path, manifest: dict) -> None:
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
