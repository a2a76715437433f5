"""Shared test utilities: independent oracles and generators.

The topological-order oracle enumerates every permutation, so it stays
honest for programs of up to 4 components regardless of how the library
implementation evolves.
"""

from __future__ import annotations

import random
import re
import string
from itertools import permutations

from schemaground.dsl import SchemaProgram
from schemaground.extraction import canonical_concepts, load_canonical_schema
from schemaground.gateway import ModelGateway, ResponseCache, ScriptedBackend
from schemaground.phrasing import concept_phrase, copula, display_name


def brute_force_topological_order(program: SchemaProgram) -> list[str]:
    """Among all permutations satisfying deps-before-node, the one whose
    declaration-index sequence is lexicographically smallest."""
    index = {node.id: node.declaration_index for node in program.nodes}
    deps = {node.id: set(node.deps) for node in program.nodes}
    best_key, best = None, None
    for perm in permutations(program.component_ids):
        seen: set[str] = set()
        valid = True
        for component_id in perm:
            if not deps[component_id] <= seen:
                valid = False
                break
            seen.add(component_id)
        if valid:
            key = [index[component_id] for component_id in perm]
            if best_key is None or key < best_key:
                best_key, best = key, list(perm)
    assert best is not None, "every acyclic program has a valid order"
    return best


def random_ident(rng: random.Random) -> str:
    segments = []
    for position in range(rng.randint(1, 2)):
        length = rng.randint(1, 5)
        alphabet = string.ascii_lowercase + string.digits
        first = rng.choice(string.ascii_lowercase if position == 0 else alphabet)
        segments.append(first + "".join(rng.choice(alphabet) for _ in range(length - 1)))
    return "-".join(segments)


def random_program_source(rng: random.Random) -> tuple[str, str, list[tuple[str, list[str]]]]:
    """A random valid program rendered with randomized whitespace.

    Returns (source, concept, [(component_id, deps), ...]).
    """
    concept = random_ident(rng)
    count = rng.randint(1, 4)
    ids: list[str] = []
    while len(ids) < count:
        candidate = random_ident(rng)
        if candidate not in ids and candidate != "concept":
            ids.append(candidate)

    def pad() -> str:
        return " " * rng.randint(0, 2)

    lines = [f"{pad()}gen{pad()}({pad()}concept{pad()}={pad()}{concept}{pad()}){pad()}={pad()}"]
    spec: list[tuple[str, list[str]]] = []
    for position, component_id in enumerate(ids):
        deps = [dep for dep in ids[:position] if rng.random() < 0.4]
        rng.shuffle(deps)
        tail = "".join(f",{pad()}{dep}{pad()}" for dep in deps)
        lines.append(
            f"{pad()}gen{pad()}({pad()}{component_id}{pad()}|{pad()}"
            f"concept{pad()}={pad()}{concept}{pad()}{tail}){pad()}"
        )
        spec.append((component_id, deps))
    return "\n".join(lines) + "\n", concept, spec


def fixture_grounding_rules(reply_for=None) -> list[dict]:
    """One scripted rule per (concept, component) over all 12 fixtures.

    reply_for(concept, component_id) supplies the grounding reply; the
    default produces a distinct tag per pair.
    """
    if reply_for is None:
        reply_for = lambda concept, component: f"{concept}--{component}--essence"
    rules = []
    for concept in canonical_concepts():
        schema = load_canonical_schema(concept)
        phrase = re.escape(concept_phrase(concept))
        for node in schema.nodes:
            tail = f"What {copula(node.id)} the {re.escape(display_name(node.id))}\\?"
            rules.append(
                {
                    "match": {"regex": f"(?s)represents {phrase}.*{tail}"},
                    "reply": reply_for(concept, node.id),
                }
            )
    return rules


def scripted_gateway(rules: list[dict], cache_dir=None, **gateway_kwargs) -> ModelGateway:
    cache = ResponseCache(cache_dir) if cache_dir is not None else None
    return ModelGateway(ScriptedBackend(rules), cache=cache, **gateway_kwargs)
