"""Order-k character language model over control-coded tune text.

Each training record is one stream: the rendered control code, a separator
byte, the tune text (headers plus body), and an end sentinel.  Only the
characters after the separator are prediction targets; the control code
conditions the first contexts but is never predicted, so generation can be
steered by prepending an arbitrary code.

The structural unit is the bar patch: the record text splits at barline
runs into one patch per bar, and contexts run across patch boundaries in
document order.  Probabilities are additive-smoothed conditional counts

    p(c | ctx) = (count(ctx, c) + alpha) / (count(ctx, *) + alpha * |V|)

so an unseen context degrades to the uniform 1/|V|, the smoothing leak
shrinks as a context accumulates evidence, and the count ratios (the
alpha -> 0 limit) are the maximum-likelihood estimates that minimize
training cross entropy.  Duplicating every record doubles all counts and
totals, leaving the ratios exactly invariant and the smoothed
probabilities invariant in the alpha -> 0 limit.
"""

from __future__ import annotations

import dataclasses
import json
import math
import random
import statistics
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import EmptyCorpusError, TuneSemanticError, TuneSyntaxError
from .labeling import ControlCode

PAD = "\x00"
SEP = "\x1e"
END = "\x03"

MODEL_MAGIC = b"EMLM\x01"
DEFAULT_MAX_CHARS = 2048


@dataclass(frozen=True)
class BarPatchSequence:
    """A tokenized record: conditioning prefix plus one patch per bar.

    Patches partition the record text at barline runs, so each patch ends
    with the barline that closes its bar; header lines contain no barline
    and therefore ride along with the first bar.  Concatenating prefix,
    separator, patches, and end sentinel reproduces the training stream.
    """

    prefix: str
    patches: tuple[str, ...]

    @property
    def text(self) -> str:
        return "".join(self.patches)

    def stream(self) -> tuple[str, int]:
        """Full character stream and the index where targets begin."""
        return self.prefix + SEP + self.text + END, len(self.prefix) + 1


def tokenize(code: ControlCode, abc_text: str) -> BarPatchSequence:
    """Split a record into its conditioning prefix and bar patches."""
    return BarPatchSequence(code.render(), _split_patches(abc_text))


def detokenize(sequence: BarPatchSequence) -> str:
    """Inverse of the patch split: the record's tune text."""
    return sequence.text


def _split_patches(body: str) -> tuple[str, ...]:
    patches: list[str] = []
    start = 0
    i = 0
    while i < len(body):
        if body[i] == "|":
            i += 1
            while i < len(body) and body[i] in "|]":
                i += 1
            patches.append(body[start:i])
            start = i
        else:
            i += 1
    if start < len(body):
        tail = body[start:]
        if patches and tail.strip() == "":
            patches[-1] += tail
        else:
            patches.append(tail)
    return tuple(patches)


@dataclass(frozen=True)
class CharLanguageModel:
    order: int
    alpha: float
    vocab: tuple[str, ...]
    counts: dict[str, dict[str, int]]
    totals: dict[str, int]

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be at least 1")
        if not self.alpha > 0:
            raise ValueError("smoothing constant must be positive")
        if not self.vocab:
            raise ValueError("vocabulary is empty")
        if PAD in self.vocab:
            raise ValueError("the pad sentinel cannot be a vocabulary symbol")

    @classmethod
    def train(
        cls,
        examples: Iterable[tuple[ControlCode, str]],
        order: int = 6,
        alpha: float = 0.01,
    ) -> "CharLanguageModel":
        vocab: set[str] = {END}
        counts: dict[str, dict[str, int]] = {}
        totals: dict[str, int] = {}
        n_examples = 0
        for code, tune_text in examples:
            n_examples += 1
            stream, start = tokenize(code, tune_text).stream()
            vocab.update(stream)
            for i in range(start, len(stream)):
                context = _context(stream, i, order)
                slot = counts.setdefault(context, {})
                slot[stream[i]] = slot.get(stream[i], 0) + 1
                totals[context] = totals.get(context, 0) + 1
        if n_examples == 0:
            raise EmptyCorpusError("cannot train a model on zero examples")
        vocab.discard(END)  # re-added below so it sorts with the rest
        return cls(order, alpha, tuple(sorted(vocab | {END})), counts, totals)

    @classmethod
    def uniform(
        cls, vocab: Sequence[str], order: int = 6, alpha: float = 0.01
    ) -> "CharLanguageModel":
        """Zero-count model: exactly uniform over the vocabulary."""
        return cls(order, alpha, tuple(sorted(set(vocab) | {END})), {}, {})

    def probability(self, context: str, char: str) -> float:
        total = self.totals.get(context, 0)
        if total == 0:
            return 1.0 / len(self.vocab)
        count = self.counts[context].get(char, 0)
        return (count + self.alpha) / (total + self.alpha * len(self.vocab))

    def surprisal(self, context: str, char: str) -> float:
        """Negative log probability in nats, evaluated in the log domain.

        Unseen contexts yield exactly log(|vocab|): going through the
        rounded float 1/|vocab| first would be off by an ulp for some
        vocabulary sizes.
        """
        total = self.totals.get(context, 0)
        if total == 0:
            return math.log(len(self.vocab))
        count = self.counts[context].get(char, 0)
        return -math.log(
            (count + self.alpha) / (total + self.alpha * len(self.vocab))
        )

    def cross_entropy(self, examples: Iterable[tuple[ControlCode, str]]) -> float:
        """Mean negative log probability per predicted character, in nats."""
        losses: list[float] = []
        for code, tune_text in examples:
            stream, start = tokenize(code, tune_text).stream()
            for i in range(start, len(stream)):
                context = _context(stream, i, self.order)
                losses.append(self.surprisal(context, stream[i]))
        if not losses:
            raise EmptyCorpusError("no prediction targets in the evaluation set")
        # exact rational mean: a uniform model scores log(|vocab|) bit-exactly
        return statistics.mean(losses)

    def sample_next(
        self,
        context: str,
        rng: random.Random,
        temperature: float = 1.0,
        allowed: Sequence[bool] | None = None,
    ) -> str | None:
        """One character, or None when every candidate is masked out."""
        probs = [self.probability(context, char) for char in self.vocab]
        if allowed is not None:
            probs = [p if ok else 0.0 for p, ok in zip(probs, allowed)]
        top = max(probs)
        if top <= 0.0:
            return None
        if temperature == 0.0:
            # deterministic: first maximal candidate in vocabulary order
            return self.vocab[max(range(len(probs)), key=lambda i: (probs[i], -i))]
        if temperature != 1.0:
            power = 1.0 / temperature
            # divide through by the max before exponentiating to dodge underflow
            probs = [(p / top) ** power for p in probs]
        mark = rng.random() * sum(probs)
        acc = 0.0
        last_live = None
        for char, weight in zip(self.vocab, probs):
            if weight > 0.0:
                last_live = char
                acc += weight
                if mark < acc:
                    return char
        return last_live

    def sample_text(
        self,
        code: ControlCode,
        rng: random.Random | None = None,
        temperature: float = 0.7,
        max_chars: int = DEFAULT_MAX_CHARS,
        guard=None,
    ) -> str:
        """Sample raw tune text for a control code until the end sentinel.

        ``guard`` is an optional state machine with ``allows(char)`` and
        ``push(char)``; characters it rejects are masked before sampling.
        Output may be a truncated fragment when ``max_chars`` is hit or the
        mask empties out, so callers should parse before trusting it.
        """
        if temperature < 0:
            raise ValueError("temperature must be non-negative")
        rng = rng or random.Random()
        stream = code.render() + SEP
        out: list[str] = []
        for _ in range(max_chars):
            context = _context(stream, len(stream), self.order)
            mask = [guard.allows(char) for char in self.vocab] if guard else None
            char = self.sample_next(context, rng, temperature, mask)
            if char is None:
                break
            if guard is not None:
                guard.push(char)
            if char == END:
                break
            out.append(char)
            stream += char
        return "".join(out)

    def save_bytes(self) -> bytes:
        payload = {
            "order": self.order,
            "alpha": self.alpha,
            "vocab": "".join(self.vocab),
            "counts": self.counts,
        }
        return MODEL_MAGIC + zlib.compress(
            json.dumps(payload, ensure_ascii=True).encode("ascii")
        )

    @classmethod
    def load_bytes(cls, blob: bytes) -> "CharLanguageModel":
        if not blob.startswith(MODEL_MAGIC):
            raise ValueError("not a language model file (bad magic)")
        payload = json.loads(zlib.decompress(blob[len(MODEL_MAGIC):]))
        counts = {ctx: dict(slot) for ctx, slot in payload["counts"].items()}
        totals = {ctx: sum(slot.values()) for ctx, slot in counts.items()}
        return cls(
            order=payload["order"],
            alpha=payload["alpha"],
            vocab=tuple(payload["vocab"]),
            counts=counts,
            totals=totals,
        )


def _context(stream: str, i: int, order: int) -> str:
    if i >= order:
        return stream[i - order: i]
    return PAD * (order - i) + stream[:i]


def save_model(model: CharLanguageModel, path):
    with open(path, "wb") as handle:
        handle.write(model.save_bytes())


def load_model(path) -> CharLanguageModel:
    with open(path, "rb") as handle:
        return CharLanguageModel.load_bytes(handle.read())


@dataclass(frozen=True)
class GenerationFailure:
    """Raw text of a sample that did not parse, with the parser's reason."""

    text: str
    reason: str


def generate(
    model: CharLanguageModel,
    label: str,
    code: ControlCode,
    temperature: float = 0.7,
    seed=0,
    max_chars: int = DEFAULT_MAX_CHARS,
    guarded: bool = False,
):
    """One sampled tune for the label: a Score, or a GenerationFailure.

    Deterministic in (model, label, code, temperature, seed).  With
    ``guarded`` set, characters that cannot extend a well-formed tune are
    masked out during sampling.
    """
    from .notation import parse_abc

    prompt = dataclasses.replace(code, label=label)
    guard = None
    if guarded:
        from .guard import CanonicalAbcGuard

        guard = CanonicalAbcGuard()
    text = model.sample_text(
        prompt, random.Random(seed), temperature, max_chars, guard
    )
    try:
        return parse_abc(text)
    except (TuneSyntaxError, TuneSemanticError) as exc:
        return GenerationFailure(text=text, reason=str(exc))


def parse_rate(
    model: CharLanguageModel,
    prompts: Sequence[ControlCode],
    samples_per_prompt: int = 1,
    seed=0,
    temperature: float = 0.7,
    max_chars: int = DEFAULT_MAX_CHARS,
    guarded: bool = False,
) -> float:
    """Fraction of generate calls that yield a parseable score."""
    if not prompts or samples_per_prompt < 1:
        raise EmptyCorpusError("parse rate needs at least one prompt and sample")
    good = 0
    total = 0
    for p_index, code in enumerate(prompts):
        for s_index in range(samples_per_prompt):
            result = generate(
                model, code.label, code, temperature,
                seed=f"{seed}:{p_index}:{s_index}",
                max_chars=max_chars, guarded=guarded,
            )
            total += 1
            good += not isinstance(result, GenerationFailure)
    return good / total


__all__ = [
    "DEFAULT_MAX_CHARS",
    "END",
    "PAD",
    "SEP",
    "BarPatchSequence",
    "CharLanguageModel",
    "GenerationFailure",
    "detokenize",
    "generate",
    "load_model",
    "parse_rate",
    "save_model",
    "tokenize",
]
