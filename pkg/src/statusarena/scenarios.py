"""Non-monetary signaling scenarios: causal narrative configurations.

A scenario is a causal triple: a private observation prompts a choice among
actions, and the chosen action emits private and/or public effects. Private
effects stay in the actor's memory; public effects broadcast to the actor and
that day's date partner, which is what lets a convention spread.

Libraries ship as JSON data files per domain (political reposts, charity,
banner colors, coffee orders), and a backend can procedurally generate new
configurations that must pass the same validator before use.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .backends import Backend, BackendRequest, load_templates, render
from .cognition import DecisionContext, DecisionOption, EmitFn, decide, retrieve_memories
from .events import ConfigError

DOMAINS = ("Political", "Charity", "Banner", "Coffee", "Custom")
VISIBILITIES = ("Private", "Public")

#: Structural rules per domain, applied on top of the generic invariants.
DOMAIN_RULES = {
    "Political": {"n_actions": 3, "status_actions": 1, "needs_noaction": True},
    "Charity": {"n_actions": 3, "status_actions": 1, "needs_noaction": True},
    "Banner": {"n_actions": 5, "status_actions": None, "needs_noaction": False},
    "Coffee": {"n_actions": 4, "status_actions": None, "needs_noaction": False},
    "Custom": {"n_actions": None, "status_actions": None, "needs_noaction": False},
}


@dataclass(frozen=True)
class Effect:
    text: str
    visibility: str  # Private | Public

    def __post_init__(self):
        if self.visibility not in VISIBILITIES:
            raise ConfigError(f"unknown effect visibility {self.visibility!r}")


@dataclass(frozen=True)
class ScenarioAction:
    option_id: str
    text: str
    signal_class: str  # StatusSignal | Neutral | NoAction
    cost: float = 0.0


@dataclass
class ScenarioConfig:
    scenario_id: str
    domain: str
    private_observation: str
    actions: list[ScenarioAction]
    effects: dict[str, list[Effect]]  # option_id -> effects

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "domain": self.domain,
            "private_observation": self.private_observation,
            "actions": [
                {"option_id": a.option_id, "text": a.text,
                 "signal_class": a.signal_class, "cost": a.cost}
                for a in self.actions
            ],
            "effects": {
                oid: [{"text": e.text, "visibility": e.visibility} for e in effs]
                for oid, effs in self.effects.items()
            },
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        try:
            actions = [
                ScenarioAction(option_id=a["option_id"], text=a["text"],
                               signal_class=a["signal_class"], cost=float(a.get("cost", 0.0)))
                for a in raw["actions"]
            ]
            effects = {
                oid: [Effect(text=e["text"], visibility=e["visibility"]) for e in effs]
                for oid, effs in raw["effects"].items()
            }
            return cls(
                scenario_id=raw["scenario_id"],
                domain=raw["domain"],
                private_observation=raw["private_observation"],
                actions=actions,
                effects=effects,
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed scenario config: {exc}") from exc


@dataclass
class ScenarioOutcome:
    agent_id: str
    scenario_id: str
    option_id: str
    emitted_effects: list[Effect] = field(default_factory=list)


def validate_scenario(cfg: ScenarioConfig, strict_domain: bool = True) -> list[str]:
    """Return a list of violations (empty when the config is valid)."""
    errors = []
    if cfg.domain not in DOMAINS:
        errors.append(f"unknown domain {cfg.domain!r}")
    if len(cfg.actions) < 2:
        errors.append("scenario needs at least 2 actions")
    ids = [a.option_id for a in cfg.actions]
    if len(set(ids)) != len(ids):
        errors.append(f"duplicate option ids: {ids}")
    for a in cfg.actions:
        if a.signal_class not in ("StatusSignal", "Neutral", "NoAction"):
            errors.append(f"action {a.option_id}: bad signal class {a.signal_class!r}")
        effs = cfg.effects.get(a.option_id, [])
        if not effs:
            errors.append(f"action {a.option_id} has no effect entry")
    for oid in cfg.effects:
        if oid not in ids:
            errors.append(f"effects for unknown option {oid}")
    has_public_action = any(
        any(e.visibility == "Public" for e in cfg.effects.get(a.option_id, []))
        for a in cfg.actions
    )
    if not has_public_action:
        errors.append("signal domains need at least one action with a public effect")
    if strict_domain and cfg.domain in DOMAIN_RULES:
        rules = DOMAIN_RULES[cfg.domain]
        if rules["n_actions"] is not None and len(cfg.actions) != rules["n_actions"]:
            errors.append(
                f"{cfg.domain} scenarios need exactly {rules['n_actions']} actions, "
                f"got {len(cfg.actions)}"
            )
        if rules["status_actions"] is not None:
            n_status = sum(1 for a in cfg.actions if a.signal_class == "StatusSignal")
            if n_status != rules["status_actions"]:
                errors.append(
                    f"{cfg.domain} scenarios need exactly {rules['status_actions']} "
                    f"StatusSignal action(s), got {n_status}"
                )
        if rules["needs_noaction"] and not any(a.signal_class == "NoAction" for a in cfg.actions):
            errors.append(f"{cfg.domain} scenarios need a NoAction option")
    return errors


def _data_path(name: str) -> Path:
    return Path(str(resources.files("statusarena").joinpath("data").joinpath(name)))


def load_library(domain: str) -> list[ScenarioConfig]:
    """Load the shipped scenario configurations for one domain."""
    if domain not in DOMAINS or domain == "Custom":
        raise ConfigError(f"unknown scenario domain {domain!r}; valid: {DOMAINS[:-1]}")
    path = _data_path(f"scenarios_{domain.lower()}.json")
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    configs = [ScenarioConfig.from_dict(entry) for entry in raw]
    for cfg in configs:
        errors = validate_scenario(cfg)
        if errors:
            raise ConfigError(f"shipped scenario {cfg.scenario_id} invalid: {errors}")
    return configs


def load_scenario_file(path: str | Path, strict_domain: bool = True) -> list[ScenarioConfig]:
    """Load and validate a user-authored scenario file (list or single object)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    entries = raw if isinstance(raw, list) else [raw]
    configs = []
    for entry in entries:
        cfg = ScenarioConfig.from_dict(entry)
        errors = validate_scenario(cfg, strict_domain=strict_domain)
        if errors:
            raise ConfigError(f"scenario {cfg.scenario_id}: " + "; ".join(errors))
        configs.append(cfg)
    return configs


class GenerationError(RuntimeError):
    """Backend kept producing invalid configurations; fall back to the library."""


def generate_scenario(domain: str, backend: Backend, seed: int,
                      max_attempts: int = 3,
                      emit: Optional[EmitFn] = None) -> ScenarioConfig:
    """Prompt the backend with the domain's causal schema and few-shot library
    examples; validate the reply, reprompting up to ``max_attempts`` times."""
    library = load_library(domain)
    templates = load_templates()
    rules = DOMAIN_RULES[domain]
    rng = random.Random(f"scenario_gen/{domain}/{seed}")
    examples = "\n".join(json.dumps(cfg.to_dict()) for cfg in library[:2])
    prompt = render(templates["scenario_gen"], domain=domain,
                    rules=json.dumps(rules), examples=examples)
    meta = {"library": [cfg.to_dict() for cfg in library], "rng": rng}
    last_errors: list[str] = []
    for attempt in range(max_attempts):
        request = BackendRequest(prompt=prompt, purpose="scenario_gen",
                                 max_length=800, meta=meta)
        resp = backend.complete(request)
        if emit is not None:
            emit("backend_call", {"actor": "scenario_generator", "purpose": "scenario_gen",
                                  "prompt": prompt, "response": resp.text})
        try:
            raw = json.loads(resp.text)
            cfg = ScenarioConfig.from_dict(raw)
        except (json.JSONDecodeError, ConfigError) as exc:
            last_errors = [str(exc)]
            prompt += f"\n\nYour previous reply was invalid ({exc}). Reply with one valid JSON object."
            continue
        errors = validate_scenario(cfg)
        if not errors:
            return cfg
        last_errors = errors
        prompt += f"\n\nYour previous configuration was rejected: {'; '.join(errors)}. Try again."
    raise GenerationError(
        f"backend failed to produce a valid {domain} scenario in {max_attempts} attempts: {last_errors}"
    )


def resolve_scenario(
    agent,
    cfg: ScenarioConfig,
    backend: Backend,
    day: int = 0,
    emit: Optional[EmitFn] = None,
    priors: Optional[dict[str, float]] = None,
    retrieval_k: int = 20,
) -> ScenarioOutcome:
    """Present the scenario to the agent, record the choice, and append the
    chosen action's private effects to the agent's memory.

    Options whose monetary cost exceeds the agent's cash are filtered out of
    the context rather than allowed to fail.
    """
    errors = validate_scenario(cfg, strict_domain=False)
    if errors:
        raise ConfigError(f"invalid scenario {cfg.scenario_id}: {errors}")
    affordable = [a for a in cfg.actions if a.cost <= agent.cash]
    if not affordable:
        affordable = [a for a in cfg.actions if a.signal_class == "NoAction"] or cfg.actions[-1:]
    options = [DecisionOption(a.option_id, a.text, a.signal_class) for a in affordable]
    query_tags = {a.option_id for a in cfg.actions} | {f"domain:{cfg.domain}"}
    ctx = DecisionContext(
        situation_text=cfg.private_observation,
        options=options,
        retrieved_memories=retrieve_memories(agent.memory, query_tags, retrieval_k),
    )
    chosen = decide(agent, ctx, backend, emit=emit, priors=priors)
    tags = {chosen, f"domain:{cfg.domain}", cfg.scenario_id}
    emitted = list(cfg.effects.get(chosen, []))
    for effect in emitted:
        if effect.visibility == "Private":
            agent.memory.add(day, 3, "Observation", effect.text, tags=tags)
            if emit is not None:
                emit("observation", {"agent_id": agent.agent_id, "kind": "Observation",
                                     "text": effect.text, "tags": sorted(tags),
                                     "visibility": "Private"})
    if emit is not None:
        emit("scenario_resolved", {"agent_id": agent.agent_id, "scenario_id": cfg.scenario_id,
                                   "domain": cfg.domain, "option_id": chosen})
    return ScenarioOutcome(agent_id=agent.agent_id, scenario_id=cfg.scenario_id,
                           option_id=chosen, emitted_effects=emitted)


def broadcast_public_effects(
    outcome: ScenarioOutcome,
    actor,
    partner,
    cfg: ScenarioConfig,
    day: int = 0,
    emit: Optional[EmitFn] = None,
) -> None:
    """Append each public effect of the chosen action to both the actor's and
    the partner's memory streams. Private effects never leave the actor."""
    tags = {outcome.option_id, f"domain:{cfg.domain}", cfg.scenario_id}
    for effect in outcome.emitted_effects:
        if effect.visibility != "Public":
            continue
        text = f"{actor.persona.name}: {effect.text}"
        for observer in (actor, partner):
            observer.memory.add(day, 3, "PublicEffect", text, tags=tags)
        if emit is not None:
            emit("public_effect", {
                "actor": actor.agent_id, "partner": partner.agent_id,
                "scenario_id": cfg.scenario_id, "option_id": outcome.option_id,
                "text": text, "tags": sorted(tags),
            })
