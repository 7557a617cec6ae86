"""A desk-scale tabular autoregressive model with tempered-tilt inference.

The pieces mirror the token-level unlearning recipe at the smallest scale
that still exercises it end to end: a frozen count-based conditional table
stands in for the pretrained model, a low-rank sigmoid head over pooled
one-hot context features plays the tilt classifier, and inference reweights
the tempered next-token distribution by the head's per-token scores.  The
metric stack (truth ratio, KS-based forget quality, ROUGE-L recall,
length-normalized probability, harmonic-mean utilities) scores the result
against a retain-only retrained reference.

Corpus file format: one document per line,
``split<TAB>question<TAB>answer<TAB>paraphrase<TAB>pert1|pert2|...``
with whitespace-separated tokens inside each field and
split in {retain, forget, ra, wf}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence

import numpy as np

BOS = -1  # context padding sentinel, never a real token id
SPLITS = ("retain", "forget", "ra", "wf")
MC_PROB_EPS = 1e-10  # stabilizer in the multiple-choice probability metric
HEAD_CLAMP = 1e-12

Tokens = tuple[str, ...]


@dataclass(frozen=True)
class QAPair:
    question: Tokens
    answer: Tokens
    paraphrase: Tokens
    perturbed: tuple[Tokens, ...]

    def __post_init__(self):
        if not (self.question and self.answer and self.paraphrase):
            raise ValueError("question, answer, and paraphrase must be nonempty")
        if len(self.perturbed) < 1 or any(not p for p in self.perturbed):
            raise ValueError("need at least one nonempty perturbed answer")


@dataclass(frozen=True)
class TinyCorpus:
    vocab: Tokens
    splits: Dict[str, tuple[QAPair, ...]]

    def __post_init__(self):
        if len(self.vocab) > 64:
            raise ValueError(f"vocab too large: {len(self.vocab)} > 64")
        if len(set(self.vocab)) != len(self.vocab):
            raise ValueError("vocab has duplicates")
        known = set(self.vocab)
        for split, pairs in self.splits.items():
            if split not in SPLITS:
                raise ValueError(f"unknown split {split!r}")
            for qa in pairs:
                for seq in (qa.question, qa.answer, qa.paraphrase, *qa.perturbed):
                    missing = set(seq) - known
                    if missing:
                        raise ValueError(f"tokens outside vocab in {split}: {missing}")

    def pairs(self, split: str) -> tuple[QAPair, ...]:
        return self.splits.get(split, ())

    def docs(self, split: str) -> list[Tokens]:
        """Training documents for a split: question+answer and
        question+paraphrase for every pair."""
        out = []
        for qa in self.pairs(split):
            out.append(qa.question + qa.answer)
            out.append(qa.question + qa.paraphrase)
        return out

    @property
    def retain_docs(self) -> list[Tokens]:
        return self.docs("retain")

    @property
    def forget_docs(self) -> list[Tokens]:
        return self.docs("forget")

    def all_docs(self) -> list[Tokens]:
        out = []
        for split in SPLITS:
            out.extend(self.docs(split))
        return out


def save_corpus(corpus: TinyCorpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for split in SPLITS:
            for qa in corpus.pairs(split):
                fh.write(
                    "\t".join(
                        (
                            split,
                            " ".join(qa.question),
                            " ".join(qa.answer),
                            " ".join(qa.paraphrase),
                            "|".join(" ".join(p) for p in qa.perturbed),
                        )
                    )
                    + "\n"
                )


def load_corpus(path) -> TinyCorpus:
    splits: Dict[str, list[QAPair]] = {}
    vocab: list[str] = []
    seen: set[str] = set()

    def note(tokens: Iterable[str]):
        for t in tokens:
            if t not in seen:
                seen.add(t)
                vocab.append(t)

    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise ValueError(f"{path}:{line_no}: expected 5 tab-separated fields")
            split, q, a, para, perts = parts
            qa = QAPair(
                question=tuple(q.split()),
                answer=tuple(a.split()),
                paraphrase=tuple(para.split()),
                perturbed=tuple(tuple(p.split()) for p in perts.split("|")),
            )
            for seq in (qa.question, qa.answer, qa.paraphrase, *qa.perturbed):
                note(seq)
            splits.setdefault(split, []).append(qa)
    return TinyCorpus(vocab=tuple(vocab), splits={k: tuple(v) for k, v in splits.items()})


# ---------------------------------------------------------------------------
# the frozen base model
# ---------------------------------------------------------------------------

class TabularLM:
    """Order-m conditional table P(y | last m tokens) with additive
    smoothing; rows are exact count ratios, frozen after fitting."""

    def __init__(self, vocab: Tokens, order: int, smoothing: float):
        if order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if smoothing <= 0.0:
            raise ValueError("smoothing must be > 0")
        self.vocab = tuple(vocab)
        self.order = order
        self.smoothing = float(smoothing)
        self.token_id = {t: i for i, t in enumerate(self.vocab)}
        self._counts: Dict[tuple[int, ...], np.ndarray] = {}

    def _ctx_ids(self, context: Sequence[str]) -> tuple[int, ...]:
        ids = [self.token_id[t] for t in context]
        padded = [BOS] * max(0, self.order - len(ids)) + ids[-self.order :]
        return tuple(padded)

    def _row(self, ctx: tuple[int, ...]) -> np.ndarray:
        """Smoothed conditional row; sums to 1 up to rounding."""
        v = len(self.vocab)
        counts = self._counts.get(ctx)
        if counts is None:
            counts = np.zeros(v)
        total = counts.sum()
        return (counts + self.smoothing) / (total + self.smoothing * v)

    def next_dist(self, context: Sequence[str]) -> np.ndarray:
        row = self._row(self._ctx_ids(context))
        return row / row.sum()


def fit_lm(docs: Sequence[Sequence[str]], order: int, smoothing: float, vocab: Tokens) -> TabularLM:
    """Maximum-likelihood counts over the documents with additive smoothing;
    contexts shorter than the order are padded with a BOS sentinel."""
    if not docs:
        raise ValueError("docs must be nonempty")
    lm = TabularLM(vocab, order, smoothing)
    v = len(vocab)
    for doc in docs:
        ids = [lm.token_id[t] for t in doc]
        for i, y in enumerate(ids):
            ctx = [BOS] * max(0, order - i) + ids[max(0, i - order) : i]
            key = tuple(ctx)
            if key not in lm._counts:
                lm._counts[key] = np.zeros(v)
            lm._counts[key][y] += 1.0
    return lm


# ---------------------------------------------------------------------------
# the tilt head
# ---------------------------------------------------------------------------

class HeadClassifier:
    """Low-rank sigmoid head g(x) = sigmoid(B @ A @ pool(x)) over pooled
    one-hot context features (d = |V| * order, one block per position,
    scaled 1/order)."""

    def __init__(self, vocab: Tokens, order: int, a: np.ndarray, b: np.ndarray):
        v = len(vocab)
        d = v * order
        if a.shape[1] != d or b.shape != (v, a.shape[0]):
            raise ValueError(f"shape mismatch: A {a.shape}, B {b.shape}, d={d}, |V|={v}")
        self.vocab = tuple(vocab)
        self.order = order
        self.token_id = {t: i for i, t in enumerate(self.vocab)}
        self.a = a
        self.b = b

    @classmethod
    def zero(cls, vocab: Tokens, order: int, hidden: int) -> "HeadClassifier":
        v = len(vocab)
        return cls(vocab, order, np.zeros((hidden, v * order)), np.zeros((v, hidden)))

    def feature(self, context: Sequence[str]) -> np.ndarray:
        ids = [self.token_id[t] for t in context]
        padded = [BOS] * max(0, self.order - len(ids)) + ids[-self.order :]
        v = len(self.vocab)
        out = np.zeros(v * self.order)
        for j, tid in enumerate(padded):
            if tid != BOS:
                out[j * v + tid] = 1.0 / self.order
        return out

    def scores(self, context: Sequence[str]) -> np.ndarray:
        """g(x): per-token retain probabilities in (0, 1)^|V|."""
        logits = self.b @ (self.a @ self.feature(context))
        return _sigmoid(logits)

    def frob_norms(self) -> tuple[float, float]:
        return float(np.linalg.norm(self.a)), float(np.linalg.norm(self.b))


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out


def head_training_stream(corpus: TinyCorpus, order: int) -> list[tuple[Tokens, str, int]]:
    """Per-token (context, target, label) triples: label 1 for retain-doc
    tokens, 0 for forget-doc tokens."""
    stream = []
    for label, docs in ((1, corpus.retain_docs), (0, corpus.forget_docs)):
        for doc in docs:
            for i, y in enumerate(doc):
                stream.append((tuple(doc[:i]), y, label))
    return stream


def train_head(
    lm: TabularLM,
    stream: Sequence[tuple[Sequence[str], str, int]],
    lam: float = 1e-4,
    epochs: int = 100,
    rng: Optional[np.random.Generator] = None,
    hidden: int = 16,
) -> HeadClassifier:
    """Fit the low-rank head by full-batch gradient descent with Armijo
    backtracking on mean cross-entropy of the scalar [g(x)]_y plus
    lam * (|A|_F^2 + |B|_F^2).  Features are encoded once and cached."""
    rng = rng or np.random.default_rng(0)
    head = HeadClassifier.zero(lm.vocab, lm.order, hidden)
    v = len(lm.vocab)
    d = v * lm.order
    a = rng.normal(0.0, 0.3, size=(hidden, d))
    b = rng.normal(0.0, 0.3, size=(v, hidden))

    feats = np.stack([head.feature(ctx) for ctx, _, _ in stream])
    y_idx = np.array([lm.token_id[y] for _, y, _ in stream])
    s = np.array([float(lbl) for _, _, lbl in stream])
    n = len(stream)
    rows = np.arange(n)

    def objective(a_m, b_m):
        logits_full = feats @ a_m.T @ b_m.T  # (n, |V|)
        t = logits_full[rows, y_idx]
        softplus = np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))
        value = float(np.mean(softplus - s * t)) + lam * (
            float(np.sum(a_m * a_m)) + float(np.sum(b_m * b_m))
        )
        sig = _sigmoid(t)
        g_logit = np.zeros((n, v))
        g_logit[rows, y_idx] = (sig - s) / n
        p = feats @ a_m.T  # (n, h)
        grad_b = g_logit.T @ p + 2.0 * lam * b_m
        grad_a = (g_logit @ b_m).T @ feats + 2.0 * lam * a_m
        return value, grad_a, grad_b

    value, grad_a, grad_b = objective(a, b)
    step = 1.0
    for _ in range(epochs):
        slope = -(float(np.sum(grad_a * grad_a)) + float(np.sum(grad_b * grad_b)))
        if slope > -1e-18:
            break
        step *= 4.0  # let the accepted step grow; backtracking reins it in
        accepted = False
        for _bt in range(80):
            a_new = a - step * grad_a
            b_new = b - step * grad_b
            v_new, ga_new, gb_new = objective(a_new, b_new)
            if v_new <= value + 1e-4 * step * slope:
                a, b, value, grad_a, grad_b = a_new, b_new, v_new, ga_new, gb_new
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    return HeadClassifier(lm.vocab, lm.order, a, b)


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------

def tilted_next_token(
    lm: TabularLM, head: Optional[HeadClassifier], context: Sequence[str], T: float
) -> np.ndarray:
    """Next-token distribution proportional to P(y|x)^(1/T) * g(x)_y with the
    head clamped to [1e-12, 1].  head=None means an all-ones tilt.

    T == 1 multiplies the raw row directly (no pow), so a constant head
    cancels exactly in the renormalization and the output reproduces the
    base distribution bit for bit.
    """
    if T < 1.0:
        raise ValueError("temperature must be >= 1")
    row = lm._row(lm._ctx_ids(context))
    if head is not None:
        g = np.clip(head.scores(context), HEAD_CLAMP, 1.0)
        w = row * g if T == 1.0 else row ** (1.0 / T) * g
    else:
        w = row if T == 1.0 else row ** (1.0 / T)
    return w / w.sum()


NextTokenModel = Callable[[Sequence[str]], np.ndarray]


def base_model(lm: TabularLM) -> NextTokenModel:
    return lm.next_dist


def tilted_model(lm: TabularLM, head: Optional[HeadClassifier], T: float) -> NextTokenModel:
    def model(context: Sequence[str]) -> np.ndarray:
        return tilted_next_token(lm, head, context, T)

    return model


@dataclass(frozen=True)
class ModelView:
    """A next-token model plus the vocab indexing its output vector."""

    vocab: Tokens
    next_dist: NextTokenModel
    token_id: Dict[str, int] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "token_id", {t: i for i, t in enumerate(self.vocab)})

    def sequence_logprob(self, prefix: Sequence[str], continuation: Sequence[str]) -> float:
        ctx = list(prefix)
        total = 0.0
        for tok in continuation:
            dist = self.next_dist(ctx)
            p = float(dist[self.token_id[tok]])
            total += math.log(p) if p > 0.0 else -math.inf
            ctx.append(tok)
        return total

    def lennorm_prob(self, prefix: Sequence[str], continuation: Sequence[str]) -> float:
        """p(continuation | prefix)^(1/len(continuation))."""
        if not continuation:
            raise ValueError("continuation must be nonempty")
        return math.exp(self.sequence_logprob(prefix, continuation) / len(continuation))

    def greedy_decode(self, prefix: Sequence[str], n_tokens: int) -> Tokens:
        ctx = list(prefix)
        out = []
        for _ in range(n_tokens):
            dist = self.next_dist(ctx)
            tok = self.vocab[int(np.argmax(dist))]
            out.append(tok)
            ctx.append(tok)
        return tuple(out)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def truth_ratio(view: ModelView, qa: QAPair) -> float:
    """Mean length-normalized probability of the perturbed answers divided
    by that of the paraphrased true answer."""
    num = float(np.mean([view.lennorm_prob(qa.question, p) for p in qa.perturbed]))
    den = view.lennorm_prob(qa.question, qa.paraphrase)
    if den == 0.0:
        return math.inf
    return num / den


def tr_plus(r_truth: float) -> float:
    """max(0, 1 - truth ratio); clipped confidence in the true answer."""
    if r_truth < 0.0:
        raise ValueError("truth ratio must be >= 0")
    return max(0.0, 1.0 - r_truth)


def rouge_l_recall(generated: Sequence[str], reference: Sequence[str]) -> float:
    """|LCS(generated, reference)| / |reference| via the standard dynamic
    program; no stemming at this scale."""
    if not reference:
        raise ValueError("reference must be nonempty")
    if not generated:
        return 0.0
    la, lb = len(generated), len(reference)
    dp = np.zeros((la + 1, lb + 1), dtype=np.int64)
    for i in range(1, la + 1):
        for j in range(1, lb + 1):
            if generated[i - 1] == reference[j - 1]:
                dp[i, j] = dp[i - 1, j - 1] + 1
            else:
                dp[i, j] = max(dp[i - 1, j], dp[i, j - 1])
    return float(dp[la, lb]) / lb


def ks_statistic(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """sup_t |F_a(t) - F_b(t)| over the pooled sample points."""
    a = np.sort(np.asarray(sample_a, dtype=np.float64))
    b = np.sort(np.asarray(sample_b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def forget_quality(
    unlearned_ratios: Sequence[float], reference_ratios: Sequence[float]
) -> tuple[float, float]:
    """Two-sample KS comparison of truth-ratio samples; the p-value uses the
    two-term approximation 2 exp(-n_f * D^2) clamped to [0, 1], with n_f the
    forget-set (unlearned-sample) size."""
    d_ks = ks_statistic(unlearned_ratios, reference_ratios)
    n_f = len(unlearned_ratios)
    return d_ks, min(1.0, 2.0 * math.exp(-n_f * d_ks * d_ks))


def harmonic_mean(values: Sequence[float]) -> float:
    vals = np.asarray(values, dtype=np.float64)
    if np.any(vals < 0.0) or np.any(vals > 1.0):
        raise ValueError("utility inputs must lie in [0, 1]")
    if np.any(vals == 0.0):
        return 0.0
    return float(len(vals) / np.sum(1.0 / vals))


def model_utility(triples: Mapping[str, tuple[float, float, float]]) -> tuple[float, float]:
    """(MU, MU-ROUGE): harmonic mean of all nine (probability, ROUGE, TR+)
    values across the retain/ra/wf splits, and of the three ROUGE values."""
    expected = ("retain", "ra", "wf")
    missing = [s for s in expected if s not in triples]
    if missing:
        raise ValueError(f"missing utility splits: {missing}")
    flat = [x for s in expected for x in triples[s]]
    rouges = [triples[s][1] for s in expected]
    return harmonic_mean(flat), harmonic_mean(rouges)


def probability_metric(view: ModelView, qa: QAPair, normalized: bool = False) -> float:
    """Length-normalized probability of the true answer; the multiple-choice
    variant divides by the summed length-normalized probabilities of the
    answer and its perturbations (plus a 1e-10 stabilizer)."""
    p_true = view.lennorm_prob(qa.question, qa.answer)
    if not normalized:
        return p_true
    p_pert = sum(view.lennorm_prob(qa.question, p) for p in qa.perturbed)
    return p_true / (p_true + p_pert + MC_PROB_EPS)


def evaluate_split(
    view: ModelView, pairs: Sequence[QAPair], normalized_probability: bool
) -> tuple[float, float, float]:
    """(mean probability, mean ROUGE-L recall of greedy decodes, mean TR+)."""
    if not pairs:
        raise ValueError("split has no pairs")
    probs, rouges, trps = [], [], []
    for qa in pairs:
        probs.append(probability_metric(view, qa, normalized=normalized_probability))
        decoded = view.greedy_decode(qa.question, len(qa.answer))
        rouges.append(rouge_l_recall(decoded, qa.answer))
        trps.append(tr_plus(truth_ratio(view, qa)))
    return float(np.mean(probs)), float(np.mean(rouges)), float(np.mean(trps))


def unlearning_report(
    lm: TabularLM,
    head: HeadClassifier,
    corpus: TinyCorpus,
    T: float,
    reference_lm: TabularLM,
) -> dict:
    """Full metric table for the tilted model against the base model and the
    retain-only retrained reference."""
    tilted = ModelView(lm.vocab, tilted_model(lm, head, T))
    base = ModelView(lm.vocab, base_model(lm))
    reference = ModelView(reference_lm.vocab, base_model(reference_lm))

    per_split = {}
    for split in ("retain", "ra", "wf"):
        normalized = split in ("ra", "wf")
        per_split[split] = evaluate_split(tilted, corpus.pairs(split), normalized)
    mu, mu_rouge = model_utility(per_split)

    forget_pairs = corpus.pairs("forget")
    unlearned_ratios = [truth_ratio(tilted, qa) for qa in forget_pairs]
    reference_ratios = [truth_ratio(reference, qa) for qa in forget_pairs]
    d_ks, fq = forget_quality(unlearned_ratios, reference_ratios)

    forget_prob_drop = []
    for qa in forget_pairs:
        p_base = base.lennorm_prob(qa.question, qa.answer)
        p_tilted = tilted.lennorm_prob(qa.question, qa.answer)
        forget_prob_drop.append(p_base / max(p_tilted, 1e-300))

    retain_pairs = corpus.pairs("retain")
    unchanged = sum(
        tilted.greedy_decode(qa.question, len(qa.answer))
        == base.greedy_decode(qa.question, len(qa.answer))
        for qa in retain_pairs
    )
    return {
        "temperature": T,
        "forget_quality": fq,
        "ks_statistic": d_ks,
        "model_utility": mu,
        "mu_rouge": mu_rouge,
        "per_split": per_split,
        "min_forget_prob_reduction": float(min(forget_prob_drop)),
        "retain_greedy_unchanged": unchanged / len(retain_pairs),
    }


# ---------------------------------------------------------------------------
# the crafted demonstration corpus
# ---------------------------------------------------------------------------

_SLOTS = (
    ("city", ("where", "does", "{a}", "live")),
    ("craft", ("what", "craft", "does", "{a}", "practice")),
    ("dish", ("what", "dish", "does", "{a}", "cook")),
    ("hue", ("what", "hue", "does", "{a}", "favor")),
)

_RETAIN_AUTHORS = ("alia", "bram", "cora", "dane")
_FORGET_AUTHORS = ("egon", "fern", "gila", "hugo")
_RA_AUTHORS = ("ivor", "jana")
_WF_SUBJECTS = ("sky", "sea", "moor", "dawn")

_RETAIN_ANSWERS = {
    "city": ("york", "oslo", "bern", "kyiv"),
    "craft": ("pottery", "weaving", "carving", "etching"),
    "dish": ("stew", "pie", "soup", "bread"),
    "hue": ("red", "blue", "green", "gold"),
}
_FORGET_ANSWERS = {
    "city": ("cairo", "quito", "hanoi", "lagos"),
    "craft": ("smithing", "glasswork", "dyeing", "milling"),
    "dish": ("tagine", "ceviche", "pho", "jollof"),
    "hue": ("violet", "amber", "teal", "coral"),
}
# ra/wf answers reuse the retain pools: only retain vs forget answers must
# stay token-disjoint, and reuse keeps the vocabulary within budget
_RA_ANSWERS = {
    "ivor": {"city": "oslo", "craft": "weaving", "dish": "pie", "hue": "blue"},
    "jana": {"city": "bern", "craft": "carving", "dish": "soup", "hue": "green"},
}
_WF_ANSWERS = {"sky": "blue", "sea": "green", "moor": "gold", "dawn": "red"}


def _qa(question: Tokens, answer_token: str, pool: Sequence[str]) -> QAPair:
    perturbed = tuple((p,) for p in pool if p != answer_token)
    return QAPair(
        question=question,
        answer=(answer_token,),
        paraphrase=(answer_token, "indeed"),
        perturbed=perturbed,
    )


def demo_corpus() -> TinyCorpus:
    """8 fictional makers (4 retain, 4 forget) with 4 facts each, answers
    token-disjoint between the retain and forget sides, plus small held-out
    analogue splits; fully deterministic."""
    splits: Dict[str, list[QAPair]] = {s: [] for s in SPLITS}
    for split, authors, answers in (
        ("retain", _RETAIN_AUTHORS, _RETAIN_ANSWERS),
        ("forget", _FORGET_AUTHORS, _FORGET_ANSWERS),
    ):
        for ai, author in enumerate(authors):
            for slot, template in _SLOTS:
                q = tuple(t.format(a=author) for t in template)
                splits[split].append(_qa(q, answers[slot][ai], answers[slot]))
    for author in _RA_AUTHORS:
        for slot, template in _SLOTS:
            q = tuple(t.format(a=author) for t in template)
            splits["ra"].append(_qa(q, _RA_ANSWERS[author][slot], _RETAIN_ANSWERS[slot]))
    for subject in _WF_SUBJECTS:
        q = tuple(t.format(a=subject) for t in _SLOTS[3][1])
        splits["wf"].append(_qa(q, _WF_ANSWERS[subject], _RETAIN_ANSWERS["hue"]))

    vocab: list[str] = []
    seen: set[str] = set()
    for split in SPLITS:
        for qa in splits[split]:
            for seq in (qa.question, qa.answer, qa.paraphrase, *qa.perturbed):
                for t in seq:
                    if t not in seen:
                        seen.add(t)
                        vocab.append(t)
    return TinyCorpus(vocab=tuple(vocab), splits={k: tuple(v) for k, v in splits.items()})
