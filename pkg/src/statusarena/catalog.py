"""Goods, brand packs, personas, and population initialization.

The catalog ships as JSON data files, one per pack (real, synthetic, hipster,
streetwear). Quality tiers are bookkeeping for analytics and pricing: tier
labels never appear in any text an agent can see. Every real-pack good has
exactly one synthetic counterpart with the same category, tier, and price,
which is what lets the brand-prior control experiments swap packs wholesale.

Agents are seeded with cash from a two-component log-normal wealth mixture
and exactly one random low-tier clothing item.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .cognition import MemoryRecord, MemoryStream
from .events import ConfigError

CATEGORIES = ("Food", "Clothing", "Gadgets", "Accessories")
TIERS = ("Low", "Mid", "High")
TIER_RANK = {t: i for i, t in enumerate(TIERS)}
PACKS = ("Real", "Synthetic", "Hipster", "Streetwear")
POPULATIONS = ("LosAngeles", "Kerala")

VISIBLE_CATEGORIES = ("Clothing", "Accessories")

#: Good id of the trending collectible used in the Veblen analysis.
COLLECTIBLE_ID = "labubu_plush_doll"
SYNTHETIC_COLLECTIBLE_ID = "moxie_grum_vinyl_figurine"


def _data_path(name: str) -> Path:
    return Path(str(resources.files("statusarena").joinpath("data").joinpath(name)))


@dataclass(frozen=True)
class Good:
    id: str
    name: str
    category: str
    tier: str
    description: str
    base_price: float
    initial_inventory: int
    pack: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ConfigError(f"unknown category {self.category!r} for good {self.id}")
        if self.tier not in TIERS:
            raise ConfigError(f"unknown tier {self.tier!r} for good {self.id}")
        if self.pack not in PACKS:
            raise ConfigError(f"unknown pack {self.pack!r} for good {self.id}")
        if self.base_price <= 0:
            raise ConfigError(f"non-positive base price for good {self.id}")
        if self.initial_inventory < 0:
            raise ConfigError(f"negative inventory for good {self.id}")
        # Tier labels are hidden from agents; they must not leak via ad copy.
        visible = f"{self.name} {self.description}".lower()
        for word in ("low tier", "mid tier", "high tier", "low-tier", "mid-tier", "high-tier"):
            if word in visible:
                raise ConfigError(f"tier label leaks into visible text of {self.id}")

    @property
    def visible_text(self) -> str:
        """Everything an agent may ever read about this good."""
        return f"{self.name}: {self.description} (listed at ${self.base_price:g})"


@dataclass(frozen=True)
class Persona:
    name: str
    sex: str  # "M" or "F"
    background: str
    formative_memories: tuple[str, ...]
    population: str

    def __post_init__(self):
        if self.sex not in ("M", "F"):
            raise ConfigError(f"persona sex must be M or F, got {self.sex!r}")
        if self.population not in POPULATIONS:
            raise ConfigError(f"unknown population {self.population!r}")


@dataclass(frozen=True)
class WealthMix:
    """Two-component log-normal mixture over starting cash.

    ``poor_location`` and ``rich_location`` are the medians of the two
    components on the original (dollar) scale; ``dispersion`` is the shared
    standard deviation on the log scale.
    """

    poor_weight: float = 0.8
    poor_location: float = 500.0
    rich_location: float = 150_000.0
    dispersion: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.poor_weight <= 1.0:
            raise ConfigError(f"poor_weight must be in [0,1], got {self.poor_weight}")
        if self.poor_location <= 0 or self.rich_location <= 0:
            raise ConfigError("wealth locations must be positive")
        if self.dispersion < 0:
            raise ConfigError("dispersion must be non-negative")


def draw_wealth(mix: WealthMix, rng: random.Random) -> float:
    """Sample starting cash from the wealth mixture. Always positive."""
    location = mix.poor_location if rng.random() < mix.poor_weight else mix.rich_location
    if mix.dispersion == 0:
        return float(location)
    return float(location * math.exp(rng.gauss(0.0, mix.dispersion)))


@dataclass
class AgentState:
    """One simulated consumer: persona, purse, possessions, and memory."""

    agent_id: str
    persona: Persona
    cash: float
    inventory: dict[str, int]  # good_id -> units held
    memory: MemoryStream
    population: str
    price_tolerance: float = 2.5  # max ask/base-price multiple for functional buys
    is_influencer: bool = False
    influencer_pack: Optional[str] = None
    rng: random.Random = field(default_factory=random.Random, repr=False)

    def add_item(self, good_id: str, qty: int = 1) -> None:
        self.inventory[good_id] = self.inventory.get(good_id, 0) + qty

    def remove_item(self, good_id: str, qty: int = 1) -> None:
        have = self.inventory.get(good_id, 0)
        if have < qty:
            raise ValueError(f"{self.agent_id} holds {have} of {good_id}, cannot remove {qty}")
        if have == qty:
            del self.inventory[good_id]
        else:
            self.inventory[good_id] = have - qty

    def holds_any(self, good_ids: Iterable[str]) -> bool:
        return any(self.inventory.get(g, 0) > 0 for g in good_ids)


# ---------------------------------------------------------------------------
# Catalog loading


def _load_pack_file(pack: str) -> list[Good]:
    fname = f"catalog_{pack.lower()}.json"
    with open(_data_path(fname), "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return [Good(**entry) for entry in raw]


def load_catalog_file(path: str | Path) -> list[Good]:
    """Load a user-supplied catalog file (same schema as the shipped packs)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    goods = [Good(**entry) for entry in raw]
    validate_catalog(goods)
    return goods


def build_catalog(pack_selection: Iterable[str]) -> list[Good]:
    """Return all goods belonging to the selected packs.

    Raises ConfigError for an empty selection or an unknown pack name.
    """
    packs = list(pack_selection)
    if not packs:
        raise ConfigError("pack selection is empty")
    for p in packs:
        if p not in PACKS:
            raise ConfigError(f"unknown pack {p!r}; valid packs: {PACKS}")
    goods: list[Good] = []
    for p in PACKS:  # fixed order keeps catalogs deterministic
        if p in packs:
            goods.extend(_load_pack_file(p))
    validate_catalog(goods)
    return goods


def validate_catalog(goods: Sequence[Good]) -> None:
    """Check catalog invariants: unique ids, tier/price monotonicity, pairing."""
    seen = set()
    for g in goods:
        if g.id in seen:
            raise ConfigError(f"duplicate good id {g.id}")
        seen.add(g.id)
    # Base price strictly increases with tier within a category.
    for cat in CATEGORIES:
        by_tier: dict[str, list[float]] = {t: [] for t in TIERS}
        for g in goods:
            if g.category == cat:
                by_tier[g.tier].append(g.base_price)
        for lo, hi in zip(TIERS, TIERS[1:]):
            if by_tier[lo] and by_tier[hi] and max(by_tier[lo]) >= min(by_tier[hi]):
                raise ConfigError(
                    f"{cat}: tier {lo} prices overlap tier {hi} "
                    f"(max {max(by_tier[lo])} >= min {min(by_tier[hi])})"
                )
    # Each real good pairs with exactly one synthetic good of identical
    # (category, tier, base_price) whenever both packs are loaded.
    reals = [g for g in goods if g.pack == "Real"]
    synths = [g for g in goods if g.pack == "Synthetic"]
    if reals and synths:
        keyed: dict[tuple, int] = {}
        for s in synths:
            key = (s.category, s.tier, s.base_price)
            keyed[key] = keyed.get(key, 0) + 1
        for r in reals:
            key = (r.category, r.tier, r.base_price)
            if keyed.get(key, 0) != 1:
                raise ConfigError(
                    f"real good {r.id} needs exactly one synthetic counterpart "
                    f"with (category, tier, price) = {key}"
                )


def goods_by_id(goods: Sequence[Good]) -> dict[str, Good]:
    return {g.id: g for g in goods}


def is_status_good(good: Good) -> bool:
    """Analytics definition: mid/high tier clothing or accessories."""
    return good.category in VISIBLE_CATEGORIES and good.tier in ("Mid", "High")


# ---------------------------------------------------------------------------
# Personas and population initialization


def load_personas(population: str, path: Optional[str | Path] = None) -> list[Persona]:
    if population not in POPULATIONS:
        raise ConfigError(f"unknown population {population!r}")
    if path is None:
        path = _data_path(f"personas_{population.lower()}.json")
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    personas = [
        Persona(
            name=e["name"],
            sex=e["sex"],
            background=e["background"],
            formative_memories=tuple(e["formative_memories"]),
            population=e.get("population", population),
        )
        for e in raw
    ]
    return personas


def init_population(
    population: str,
    n: int,
    mix: WealthMix,
    seed: int,
    catalog: Optional[Sequence[Good]] = None,
    persona_path: Optional[str | Path] = None,
    tolerance_dispersion: float = 0.35,
    tolerance_median: float = 2.5,
) -> list[AgentState]:
    """Build ``n`` agents: wealth draw, one low-tier clothing item, formative
    memories only, and a sex split within one of even.

    Pure function of its arguments: the same seed gives the same population.
    """
    if n <= 0:
        raise ConfigError("population size must be positive")
    personas = load_personas(population, persona_path)
    males = [p for p in personas if p.sex == "M"]
    females = [p for p in personas if p.sex == "F"]
    need_m = n // 2 + (n % 2)
    need_f = n // 2
    if len(males) < need_m or len(females) < need_f:
        raise ConfigError(
            f"persona corpus for {population} too small: need {need_m}M+{need_f}F, "
            f"have {len(males)}M+{len(females)}F"
        )
    if catalog is None:
        catalog = build_catalog({"Real"})
    low_clothing = [g for g in catalog if g.category == "Clothing" and g.tier == "Low"]
    if not low_clothing:
        raise ConfigError("catalog has no low-tier clothing to seed inventories")

    rng = random.Random(f"init_population/{population}/{n}/{seed}")
    rng.shuffle(males)
    rng.shuffle(females)
    chosen: list[Persona] = []
    mi = fi = 0
    for i in range(n):
        if i % 2 == 0 and mi < need_m:
            chosen.append(males[mi])
            mi += 1
        else:
            chosen.append(females[fi])
            fi += 1

    agents = []
    for i, persona in enumerate(chosen):
        agent_id = f"agent_{i:03d}"
        cash = draw_wealth(mix, rng)
        item = rng.choice(low_clothing)
        memory = MemoryStream(agent_id)
        for j, text in enumerate(persona.formative_memories):
            memory.append(MemoryRecord(timestamp=(-1, 0, j), kind="Formative", text=text, tags=frozenset()))
        tol = tolerance_median
        if tolerance_dispersion > 0:
            tol = max(1.2, tolerance_median * math.exp(rng.gauss(0.0, tolerance_dispersion)))
        agents.append(
            AgentState(
                agent_id=agent_id,
                persona=persona,
                cash=cash,
                inventory={item.id: 1},
                memory=memory,
                population=population,
                price_tolerance=tol,
                rng=random.Random(f"agent/{seed}/{agent_id}"),
            )
        )
    return agents


# ---------------------------------------------------------------------------
# Persona corpus generation (CLI utility, not a runtime dependency)

_LA_FIRST_M = ["Ethan", "Marcus", "Tyler", "Diego", "Jordan", "Caleb", "Andre", "Víctor",
               "Noah", "Ulysses", "Brandon", "Malik", "Sergio", "Dylan", "Trevor", "Julian",
               "Wesley", "Omar", "Patrick", "Russell", "Devin", "Hector", "Spencer", "Gavin",
               "Lucas", "Miles", "Anthony", "Felix", "Grant", "Ruben"]
_LA_FIRST_F = ["Olivia", "Mia", "Sofia", "Harper", "Lily", "Jasmine", "Chloe", "Amara",
               "Isabella", "Zoe", "Camila", "Ruby", "Naomi", "Vanessa", "Stella", "Paige",
               "Alexis", "Brooke", "Serena", "Diana", "Monica", "Tessa", "Gabriela", "Erin",
               "Holly", "Maya", "Lauren", "Priya", "Rachel", "Simone"]
_LA_LAST = ["Perez", "Vance", "Martin", "Delgado", "Okafor", "Nguyen", "Brooks", "Castillo",
            "Kim", "Whitfield", "Moreno", "Sanders", "Tran", "Abrams", "Fontaine", "Higgins",
            "Roswell", "Ibe", "Calloway", "Duarte", "Ellison", "Park", "Mercado", "Voss",
            "Lindqvist", "Harmon", "Quiroga", "Beaumont", "Sato", "Whitaker"]

_KERALA_FIRST_M = ["Arjun", "Vishnu", "Rahul", "Anand", "Hari", "Suresh", "Jithin", "Manoj",
                   "Pranav", "Nikhil", "Deepak", "Sandeep", "Vineeth", "Ajay", "Kiran",
                   "Ravi", "Sooraj", "Akhil", "Gokul", "Unni", "Biju", "Shyam", "Febin",
                   "Mathew", "Thomas", "George", "Ashwin", "Varun", "Rakesh", "Sanju"]
_KERALA_FIRST_F = ["Lakshmi", "Meera", "Anju", "Divya", "Parvathy", "Remya", "Sreeja",
                   "Anitha", "Gita", "Nimmy", "Aswathy", "Keerthana", "Devika", "Archana",
                   "Mini", "Smitha", "Reshma", "Anila", "Jisha", "Veena", "Chitra", "Indu",
                   "Soumya", "Treesa", "Annie", "Rani", "Leela", "Bindu", "Maya", "Saritha"]
_KERALA_LAST = ["Nair", "Menon", "Pillai", "Varghese", "Kurup", "Krishnan", "Namboothiri",
                "Thampi", "Panicker", "Iyer", "Chacko", "Joseph", "Kutty", "Warrier",
                "Rajan", "Das", "Mohan", "Unnikrishnan", "Balan", "Achari", "Sekharan",
                "Nambiar", "Antony", "Cherian", "Thomas", "Raman", "Vasu", "Madhavan",
                "Gopinath", "Kaimal"]

_OCCUPATIONS = ["graphic designer", "school teacher", "line cook", "software developer",
                "nurse", "delivery driver", "yoga instructor", "bartender", "accountant",
                "photographer", "warehouse supervisor", "barista", "real-estate agent",
                "musician", "dental hygienist", "paralegal", "electrician", "copywriter",
                "social worker", "fitness coach"]

_LA_PLACES = ["Echo Park", "Venice Beach", "Koreatown", "Silver Lake", "Long Beach",
              "Highland Park", "Culver City", "Pasadena", "North Hollywood", "Inglewood"]
_KERALA_PLACES = ["Kochi", "Thiruvananthapuram", "Kozhikode", "Thrissur", "Alappuzha",
                  "Kottayam", "Palakkad", "Kannur", "Kollam", "Munnar"]

_FORMATIVE_TEMPLATES = [
    "As a child, {name} spent long afternoons at a relative's home in {place}, learning to value patience.",
    "{name} still remembers the first paycheck from a weekend job and the feeling of independence it brought.",
    "A teacher once told {name} that curiosity matters more than talent, and it stuck.",
    "{name} once saved for months to buy a small gift for a parent, and remembers the pride of handing it over.",
    "Moving house as a teenager taught {name} to make friends quickly and to travel light.",
    "{name} grew up helping at a family stall on weekends and learned to read people's moods.",
    "Losing a close friendship in school left {name} careful about trust, but loyal once it is given.",
    "{name} taught themselves to cook from a stained notebook of family recipes.",
]


def generate_personas(
    population: str,
    n: int,
    seed: int,
    backend=None,
) -> list[Persona]:
    """Produce a persona corpus. With a live backend, backgrounds are written
    by the model; otherwise they are templated. Balanced across sexes."""
    if population not in POPULATIONS:
        raise ConfigError(f"unknown population {population!r}")
    rng = random.Random(f"personas/{population}/{n}/{seed}")
    if population == "LosAngeles":
        first_m, first_f, last, places = _LA_FIRST_M, _LA_FIRST_F, _LA_LAST, _LA_PLACES
    else:
        first_m, first_f, last, places = _KERALA_FIRST_M, _KERALA_FIRST_F, _KERALA_LAST, _KERALA_PLACES
    used = set()
    personas = []
    for i in range(n):
        sex = "M" if i % 2 == 0 else "F"
        pool = first_m if sex == "M" else first_f
        for _ in range(1000):
            name = f"{rng.choice(pool)} {rng.choice(last)}"
            if name not in used:
                used.add(name)
                break
        else:
            raise ConfigError("name pool exhausted; lower n")
        occupation = rng.choice(_OCCUPATIONS)
        place = rng.choice(places)
        age = rng.randint(24, 44)
        background = (
            f"{name} is a {age}-year-old {occupation} from {place}. "
            f"{'He' if sex == 'M' else 'She'} lives modestly, keeps a close circle of friends, "
            f"and is quietly ambitious about building a good life."
        )
        if backend is not None and not getattr(backend, "is_stub", False):
            from .backends import BackendRequest

            resp = backend.complete(
                BackendRequest(
                    prompt=(
                        f"Write a two-sentence biography for {name}, a {age}-year-old "
                        f"{occupation} living in {place}. Plain prose, third person."
                    ),
                    max_length=120,
                )
            )
            if resp.text.strip():
                background = resp.text.strip()
        formative = tuple(
            t.format(name=name.split()[0], place=place)
            for t in rng.sample(_FORMATIVE_TEMPLATES, 3)
        )
        personas.append(
            Persona(name=name, sex=sex, background=background,
                    formative_memories=formative, population=population)
        )
    return personas


def write_persona_file(personas: Sequence[Persona], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = [
        {
            "name": p.name,
            "sex": p.sex,
            "background": p.background,
            "formative_memories": list(p.formative_memories),
            "population": p.population,
        }
        for p in personas
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, ensure_ascii=False)
        fh.write("\n")
    return path
