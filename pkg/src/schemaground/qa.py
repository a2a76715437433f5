"""Question answering under the five-mode prompting ladder.

Modes are cumulative: the plain concept framing, plus the schema program
text, plus grounded component descriptions woven into the framing sentence,
plus (in the final mode) the whole grounding conversation as prior turns.
"""

from __future__ import annotations

import json
import re
import string
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .dsl import SchemaProgram, render_schema, topological_order
from .errors import (
    GatewayError,
    MissingResolvedSchemaError,
    MissingSchemaError,
)
from .extraction import CATEGORIES
from .gateway import ImageRef, Message, ModelGateway
from .grounding import ResolvedSchema
from .phrasing import concept_phrase, copula, display_name

QUESTION_TYPES = ("counting", "binary", "open")

NO_MATCH = "<no-match>"


class AnswerMode(str, Enum):
    BASELINE = "baseline"
    SCHEMA_ONLY = "schema_only"
    GROUNDING_SEQUENTIAL = "grounding_sequential"
    GROUNDING_HIERARCHICAL = "grounding_hierarchical"
    FULL_DSG = "full_dsg"


GROUNDED_MODES = (
    AnswerMode.GROUNDING_SEQUENTIAL,
    AnswerMode.GROUNDING_HIERARCHICAL,
    AnswerMode.FULL_DSG,
)


@dataclass(frozen=True)
class VqaInstance:
    id: str
    concept: str
    category: str
    image: ImageRef
    question: str
    question_type: str
    annotator_answers: tuple[str, ...]
    modal_answer: str
    options: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.question_type not in QUESTION_TYPES:
            raise ValueError(f"unknown question type {self.question_type!r}")
        if len(self.annotator_answers) != 5:
            raise ValueError(
                f"expected exactly 5 annotator answers, got {len(self.annotator_answers)}"
            )
        counts = Counter(self.annotator_answers)
        if counts.get(self.modal_answer, 0) != max(counts.values()):
            raise ValueError("modal_answer is not a mode of annotator_answers")
        if self.options is not None:
            if not self.options:
                raise ValueError("options, when present, must be non-empty")
            if any(not option.strip() for option in self.options):
                raise ValueError("options must be non-blank strings")


@dataclass(frozen=True)
class Prediction:
    instance_id: str
    mode: AnswerMode
    raw_text: str
    normalized: str
    run_index: int = 0

    def __post_init__(self):
        if self.run_index < 0:
            raise ValueError("run_index must be >= 0")


def write_predictions_jsonl(predictions, path) -> None:
    """One Prediction per line, ordered by (run_index, instance_id)."""
    ordered = sorted(predictions, key=lambda p: (p.run_index, p.instance_id))
    lines = [
        json.dumps(
            {
                "instance_id": p.instance_id,
                "mode": p.mode.value,
                "raw_text": p.raw_text,
                "normalized": p.normalized,
                "run_index": p.run_index,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        for p in ordered
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_predictions_jsonl(path) -> list[Prediction]:
    predictions = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        payload = json.loads(line)
        predictions.append(
            Prediction(
                instance_id=payload["instance_id"],
                mode=AnswerMode(payload["mode"]),
                raw_text=payload["raw_text"],
                normalized=payload["normalized"],
                run_index=payload["run_index"],
            )
        )
    return predictions


_NUMBER_WORDS = {
    "zero": "0", "one": "1", "two": "2", "three": "3", "four": "4",
    "five": "5", "six": "6", "seven": "7", "eight": "8", "nine": "9",
    "ten": "10", "eleven": "11", "twelve": "12", "thirteen": "13",
    "fourteen": "14", "fifteen": "15", "sixteen": "16", "seventeen": "17",
    "eighteen": "18", "nineteen": "19", "twenty": "20",
}

_NUMBER_WORD_RE = re.compile(r"\b(" + "|".join(_NUMBER_WORDS) + r")\b")
_ARTICLE_RE = re.compile(r"^(?:a|an|the)\s+")
_EDGE_CHARS = string.punctuation + string.whitespace


def _clean(text: str) -> str:
    text = re.sub(r"\s+", " ", text.lower()).strip(_EDGE_CHARS)
    while True:
        stripped = _ARTICLE_RE.sub("", text, count=1)
        if stripped == text or not stripped:
            break
        text = stripped
    text = _NUMBER_WORD_RE.sub(lambda match: _NUMBER_WORDS[match.group(0)], text)
    return text.strip(_EDGE_CHARS)


def normalize_answer(raw: str, options: tuple[str, ...] | list[str] | None = None) -> str:
    """Canonicalize a free-text answer, optionally resolving it to an option.

    Lowercases, strips surrounding punctuation and leading articles, and maps
    the number words zero through twenty to digits. With options, the unique
    option whose cleaned form occurs in the cleaned reply is returned
    verbatim; zero or several matching options yield the NO_MATCH sentinel.
    """
    cleaned = _clean(raw)
    if options is None:
        return cleaned
    matched = [option for option in options if _clean(option) and _clean(option) in cleaned]
    if len(matched) == 1:
        return matched[0]
    return NO_MATCH


def _bindings_sentence(concept: str, resolved: ResolvedSchema, order: tuple[str, ...]) -> str:
    clauses = [f"Imagine that the image represents {concept_phrase(concept)}"]
    descriptions = resolved.descriptions()
    for component_id in order:
        clauses.append(
            f", and the {display_name(component_id)} {copula(component_id)} "
            f"{descriptions[component_id]}"
        )
    return "".join(clauses) + "."


def prompt_blocks(
    instance: VqaInstance,
    mode: AnswerMode,
    schema: SchemaProgram | None = None,
    resolved: ResolvedSchema | None = None,
) -> list[str]:
    """The text blocks whose newline-join forms the final user message.

    Later modes extend earlier ones: the framing sentence (with grounded
    descriptions folded in for grounded modes), the schema text for all
    non-baseline modes, the question, and the option instruction if present.
    """
    mode = AnswerMode(mode)
    if mode is not AnswerMode.BASELINE and schema is None:
        raise MissingSchemaError(f"mode {mode.value} requires a schema")
    if mode in GROUNDED_MODES and resolved is None:
        raise MissingResolvedSchemaError(f"mode {mode.value} requires a resolved schema")
    blocks: list[str] = []
    if mode in GROUNDED_MODES:
        blocks.append(_bindings_sentence(instance.concept, resolved, topological_order(schema)))
    else:
        blocks.append(f"Imagine that the image represents {concept_phrase(instance.concept)}.")
    if mode is not AnswerMode.BASELINE:
        blocks.append(render_schema(schema).rstrip("\n"))
    blocks.append(instance.question)
    if instance.options is not None:
        blocks.append("Answer with exactly one of: " + ", ".join(instance.options) + ".")
    return blocks


def build_augmented_prompt(
    instance: VqaInstance,
    mode: AnswerMode,
    schema: SchemaProgram | None = None,
    resolved: ResolvedSchema | None = None,
) -> list[Message]:
    """Assemble the message list for one instance under one mode.

    full_dsg prepends the grounding transcript as prior text turns; every
    other mode sends a single user message. The image rides on the final
    user message.
    """
    mode = AnswerMode(mode)
    blocks = prompt_blocks(instance, mode, schema=schema, resolved=resolved)
    final = Message("user", "\n".join(blocks), images=(instance.image,))
    if mode is AnswerMode.FULL_DSG:
        prior = [Message(message.role, message.text) for message in resolved.transcript]
        return prior + [final]
    return [final]


def answer(
    instance: VqaInstance,
    mode: AnswerMode,
    gateway: ModelGateway,
    schema: SchemaProgram | None = None,
    resolved: ResolvedSchema | None = None,
    run_index: int = 0,
    seed_hint: int | None = None,
) -> Prediction:
    """Issue the prompt for one instance and normalize the reply."""
    messages = build_augmented_prompt(instance, mode, schema=schema, resolved=resolved)
    try:
        response = gateway.chat(messages, seed_hint=seed_hint)
    except GatewayError as err:
        raise type(err)(f"while answering instance {instance.id!r}: {err}") from err
    return Prediction(
        instance_id=instance.id,
        mode=AnswerMode(mode),
        raw_text=response.text,
        normalized=normalize_answer(response.text, instance.options),
        run_index=run_index,
    )
