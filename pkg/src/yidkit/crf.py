"""Linear-chain CRF tagger over pluggable word embeddings.

Scores are emission (a linear layer over per-token vectors, optionally fed
through a small bidirectional recurrent layer) plus tag-transition weights
with dedicated begin/end states.  All inference runs in log space; training
gradients come from forward-backward marginals, checked against finite
differences in the test suite.

Embedding sources: a static vector table, a per-token vector file (one
precomputed vector per token instance), or a trainable lookup table whose
rows receive gradients.
"""

from __future__ import annotations

import copy
import json
import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .embeddings import EmbeddingTable


class CrfError(ValueError):
    pass


class LengthMismatch(CrfError):
    pass


class UnknownTag(CrfError):
    def __init__(self, tag: str, location: str | None = None):
        self.tag = tag
        self.location = location
        where = f" at {location}" if location else ""
        super().__init__(f"tag {tag!r} not in the model tagset{where}")


class ChecksumMismatch(CrfError):
    def __init__(self, expected: str, got: str):
        super().__init__(f"inventory checksum mismatch: model built with {expected[:12]}…, runtime has {got[:12]}…")


class TokenVectorMisalignment(CrfError):
    def __init__(self, sentence_index: int, detail: str = ""):
        self.sentence_index = sentence_index
        super().__init__(f"token vectors misaligned at sentence {sentence_index}" + (f": {detail}" if detail else ""))


@dataclass
class TrainingConfig:
    learning_rate: float = 5e-5
    batch_size: int = 32
    max_epochs: int = 50
    warmup_fraction: float = 0.1
    optimizer: str = "adaptive"  # adaptive (decoupled-weight-decay Adam) or plain-sgd
    weight_decay: float = 0.0
    seed: int = 0


class CrfModel:
    """Parameters plus tagset; BOS/EOS are rows K and K+1 of the transition matrix."""

    def __init__(self, tags: list[str], dim: int, params: dict[str, np.ndarray],
                 hidden: int = 0, lookup_vocab: list[str] | None = None):
        if len(set(tags)) != len(tags):
            raise CrfError("duplicate tags")
        self.tags = list(tags)
        self.tag_index = {t: i for i, t in enumerate(tags)}
        self.dim = dim
        self.hidden = hidden
        self.lookup_vocab = list(lookup_vocab) if lookup_vocab is not None else None
        self.lookup_index = ({t: i for i, t in enumerate(self.lookup_vocab)}
                             if self.lookup_vocab is not None else None)
        self.params = params
        K = len(tags)
        feat = 2 * hidden if hidden else dim
        expect = {"emission_w": (K, feat), "emission_b": (K,), "trans": (K + 2, K + 2)}
        if hidden:
            expect.update({
                "rnn_wxf": (hidden, dim), "rnn_whf": (hidden, hidden), "rnn_bf": (hidden,),
                "rnn_wxb": (hidden, dim), "rnn_whb": (hidden, hidden), "rnn_bb": (hidden,),
            })
        if self.lookup_vocab is not None:
            expect["lookup"] = (len(self.lookup_vocab), dim)
        for name, shape in expect.items():
            if name not in params or params[name].shape != shape:
                raise CrfError(f"parameter {name} missing or misshapen (want {shape})")
        for name, arr in params.items():
            if not np.all(np.isfinite(arr)):
                raise CrfError(f"parameter {name} contains non-finite values")

    @property
    def n_tags(self) -> int:
        return len(self.tags)

    @property
    def bos(self) -> int:
        return self.n_tags

    @property
    def eos(self) -> int:
        return self.n_tags + 1

    @classmethod
    def create(cls, tags: list[str], dim: int, hidden: int = 0,
               lookup_vocab: list[str] | None = None, seed: int = 0) -> "CrfModel":
        """Seeded init: emission uniform in ±1/sqrt(fan-in), transitions zero."""
        rng = np.random.default_rng(seed)
        K = len(tags)
        feat = 2 * hidden if hidden else dim

        def unif(shape, fan_in):
            s = 1.0 / math.sqrt(fan_in)
            return rng.uniform(-s, s, shape)

        params = {
            "emission_w": unif((K, feat), feat),
            "emission_b": unif((K,), feat),
            "trans": np.zeros((K + 2, K + 2)),
        }
        if hidden:
            params.update({
                "rnn_wxf": unif((hidden, dim), dim), "rnn_whf": unif((hidden, hidden), hidden),
                "rnn_bf": np.zeros(hidden),
                "rnn_wxb": unif((hidden, dim), dim), "rnn_whb": unif((hidden, hidden), hidden),
                "rnn_bb": np.zeros(hidden),
            })
        if lookup_vocab is not None:
            params["lookup"] = unif((len(lookup_vocab), dim), dim)
        return cls(tags, dim, params, hidden=hidden, lookup_vocab=lookup_vocab)


@dataclass
class Instance:
    tokens: list[str]
    tag_ids: Optional[np.ndarray] = None     # None for untagged input
    X: Optional[np.ndarray] = None           # static features (T, dim)
    token_ids: Optional[np.ndarray] = None   # rows into the trainable lookup


# -- embedding providers -----------------------------------------------------


class StaticProvider:
    """Features from a fixed vector table (OOV handled by the table's policy)."""

    def __init__(self, table: EmbeddingTable):
        self.table = table

    def features(self, tokens: list[str], sent_index: int) -> np.ndarray:
        return np.array([self.table.lookup(t) for t in tokens], dtype=np.float64)


class TokenFileProvider:
    """Features from a per-token vector file; requires exact alignment."""

    def __init__(self, blocks: list[tuple[list[str], np.ndarray]]):
        self.blocks = blocks

    def features(self, tokens: list[str], sent_index: int) -> np.ndarray:
        if sent_index >= len(self.blocks):
            raise TokenVectorMisalignment(sent_index, "no vector block for sentence")
        btoks, X = self.blocks[sent_index]
        if len(btoks) != len(tokens):
            raise TokenVectorMisalignment(sent_index, f"{len(btoks)} vectors for {len(tokens)} tokens")
        if btoks != list(tokens):
            raise TokenVectorMisalignment(sent_index, "token text differs")
        return X


def write_token_vectors(path, sentences: list[tuple[list[str], np.ndarray]]) -> None:
    """token<TAB>space-separated floats, one line per token, blank line between sentences."""
    with open(path, "w", encoding="utf-8") as fh:
        for idx, (tokens, X) in enumerate(sentences):
            if idx:
                fh.write("\n")
            for tok, row in zip(tokens, X):
                fh.write(tok + "\t" + " ".join(f"{v:.10e}" for v in row) + "\n")


def read_token_vectors(path) -> list[tuple[list[str], np.ndarray]]:
    blocks: list[tuple[list[str], np.ndarray]] = []
    tokens: list[str] = []
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                if tokens:
                    blocks.append((tokens, np.array(rows, dtype=np.float64)))
                    tokens, rows = [], []
                continue
            tok, _, rest = line.partition("\t")
            if not rest:
                raise CrfError(f"{path}:{lineno}: expected token<TAB>floats")
            tokens.append(tok)
            rows.append([float(x) for x in rest.split()])
    if tokens:
        blocks.append((tokens, np.array(rows, dtype=np.float64)))
    return blocks


def build_lookup_vocab(token_sentences: list[list[str]]) -> list[str]:
    """Training vocabulary for a trainable lookup; <unk> at row 0."""
    seen = sorted({t for sent in token_sentences for t in sent})
    return ["<unk>"] + seen


def make_instances(model: CrfModel, token_sentences: list[list[str]],
                   tag_sentences: list[list[str]] | None = None,
                   provider=None) -> list[Instance]:
    insts = []
    for idx, tokens in enumerate(token_sentences):
        tag_ids = None
        if tag_sentences is not None:
            try:
                tag_ids = np.array([model.tag_index[t] for t in tag_sentences[idx]], dtype=np.int64)
            except KeyError as exc:
                raise UnknownTag(exc.args[0], f"sentence {idx}") from exc
            if len(tag_ids) != len(tokens):
                raise LengthMismatch(f"sentence {idx}: {len(tokens)} tokens but {len(tag_ids)} tags")
        if model.lookup_vocab is not None:
            ids = np.array([model.lookup_index.get(t, 0) for t in tokens], dtype=np.int64)
            insts.append(Instance(tokens, tag_ids, token_ids=ids))
        else:
            insts.append(Instance(tokens, tag_ids, X=provider.features(tokens, idx)))
    return insts


# -- forward computation -----------------------------------------------------


def _rnn_forward(params: dict, X: np.ndarray) -> tuple[np.ndarray, dict]:
    T = X.shape[0]
    H = params["rnn_wxf"].shape[0]
    hf = np.zeros((T, H))
    prev = np.zeros(H)
    for t in range(T):
        prev = np.tanh(params["rnn_wxf"] @ X[t] + params["rnn_whf"] @ prev + params["rnn_bf"])
        hf[t] = prev
    hb = np.zeros((T, H))
    nxt = np.zeros(H)
    for t in range(T - 1, -1, -1):
        nxt = np.tanh(params["rnn_wxb"] @ X[t] + params["rnn_whb"] @ nxt + params["rnn_bb"])
        hb[t] = nxt
    return np.concatenate([hf, hb], axis=1), {"X": X, "hf": hf, "hb": hb}


def _rnn_backward(params: dict, cache: dict, dfeats: np.ndarray) -> tuple[dict, np.ndarray]:
    X, hf, hb = cache["X"], cache["hf"], cache["hb"]
    T, H = hf.shape
    grads = {name: np.zeros_like(params[name]) for name in
             ("rnn_wxf", "rnn_whf", "rnn_bf", "rnn_wxb", "rnn_whb", "rnn_bb")}
    dX = np.zeros_like(X)
    carry = np.zeros(H)
    for t in range(T - 1, -1, -1):
        da = (dfeats[t, :H] + carry) * (1.0 - hf[t] ** 2)
        grads["rnn_wxf"] += np.outer(da, X[t])
        if t > 0:
            grads["rnn_whf"] += np.outer(da, hf[t - 1])
        grads["rnn_bf"] += da
        dX[t] += params["rnn_wxf"].T @ da
        carry = params["rnn_whf"].T @ da
    carry = np.zeros(H)
    for t in range(T):
        da = (dfeats[t, H:] + carry) * (1.0 - hb[t] ** 2)
        grads["rnn_wxb"] += np.outer(da, X[t])
        if t < T - 1:
            grads["rnn_whb"] += np.outer(da, hb[t + 1])
        grads["rnn_bb"] += da
        dX[t] += params["rnn_wxb"].T @ da
        carry = params["rnn_whb"].T @ da
    return grads, dX


def _input_features(model: CrfModel, inst: Instance) -> tuple[np.ndarray, dict | None]:
    X = model.params["lookup"][inst.token_ids] if model.lookup_vocab is not None else inst.X
    if model.hidden:
        feats, cache = _rnn_forward(model.params, X)
        return feats, cache
    return X, None


def emission_scores(model: CrfModel, inst: Instance) -> np.ndarray:
    feats, _ = _input_features(model, inst)
    return feats @ model.params["emission_w"].T + model.params["emission_b"]


def score_sentence(model: CrfModel, emissions: np.ndarray, tag_ids) -> float:
    tag_ids = np.asarray(tag_ids, dtype=np.int64)
    if len(tag_ids) != emissions.shape[0]:
        raise LengthMismatch(f"{emissions.shape[0]} positions but {len(tag_ids)} tags")
    trans = model.params["trans"]
    score = trans[model.bos, tag_ids[0]] + emissions[0, tag_ids[0]]
    for t in range(1, len(tag_ids)):
        score += trans[tag_ids[t - 1], tag_ids[t]] + emissions[t, tag_ids[t]]
    return float(score + trans[tag_ids[-1], model.eos])


def _forward_alphas(model: CrfModel, emissions: np.ndarray) -> np.ndarray:
    K = model.n_tags
    trans = model.params["trans"]
    T = emissions.shape[0]
    alphas = np.empty((T, K))
    alphas[0] = trans[model.bos, :K] + emissions[0]
    for t in range(1, T):
        alphas[t] = logsumexp(alphas[t - 1][:, None] + trans[:K, :K], axis=0) + emissions[t]
    return alphas


def _backward_betas(model: CrfModel, emissions: np.ndarray) -> np.ndarray:
    K = model.n_tags
    trans = model.params["trans"]
    T = emissions.shape[0]
    betas = np.empty((T, K))
    betas[T - 1] = trans[:K, model.eos]
    for t in range(T - 2, -1, -1):
        betas[t] = logsumexp(trans[:K, :K] + (emissions[t + 1] + betas[t + 1])[None, :], axis=1)
    return betas


def log_partition(model: CrfModel, emissions: np.ndarray) -> float:
    alphas = _forward_alphas(model, emissions)
    return float(logsumexp(alphas[-1] + model.params["trans"][:model.n_tags, model.eos]))


def log_partition_backward(model: CrfModel, emissions: np.ndarray) -> float:
    """Same quantity via the backward recursion; used as a numerical cross-check."""
    betas = _backward_betas(model, emissions)
    trans = model.params["trans"]
    return float(logsumexp(trans[model.bos, :model.n_tags] + emissions[0] + betas[0]))


def marginals(model: CrfModel, emissions: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """(logZ, unary (T,K), pairwise (T-1,K,K)) posterior marginals."""
    K = model.n_tags
    trans = model.params["trans"]
    T = emissions.shape[0]
    alphas = _forward_alphas(model, emissions)
    betas = _backward_betas(model, emissions)
    logZ = float(logsumexp(alphas[-1] + trans[:K, model.eos]))
    unary = np.exp(alphas + betas - logZ)
    pairwise = np.empty((max(T - 1, 0), K, K))
    for t in range(T - 1):
        pairwise[t] = np.exp(alphas[t][:, None] + trans[:K, :K]
                             + (emissions[t + 1] + betas[t + 1])[None, :] - logZ)
    return logZ, unary, pairwise


def viterbi(model: CrfModel, emissions: np.ndarray) -> tuple[np.ndarray, float]:
    """Best path and its score; ties resolve to the lower tag index at every step."""
    K = model.n_tags
    trans = model.params["trans"]
    T = emissions.shape[0]
    delta = trans[model.bos, :K] + emissions[0]
    back = np.zeros((T, K), dtype=np.int64)
    for t in range(1, T):
        cand = delta[:, None] + trans[:K, :K]
        back[t] = np.argmax(cand, axis=0)  # first max = lowest index on ties
        delta = cand[back[t], np.arange(K)] + emissions[t]
    final = delta + trans[:K, model.eos]
    last = int(np.argmax(final))
    path = np.empty(T, dtype=np.int64)
    path[T - 1] = last
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, float(final[last])


def nll_and_gradient(model: CrfModel, emissions: np.ndarray,
                     gold_tags) -> tuple[float, dict[str, np.ndarray]]:
    """Sentence NLL with gradients at the lattice level.

    Returns (loss, {"emissions": (T,K), "trans": (K+2,K+2)}): posterior
    marginal expectations minus gold indicator counts.
    """
    gold_tags = np.asarray(gold_tags, dtype=np.int64)
    T = emissions.shape[0]
    K = model.n_tags
    logZ, unary, pairwise = marginals(model, emissions)
    nll = logZ - score_sentence(model, emissions, gold_tags)
    dE = unary.copy()
    dE[np.arange(T), gold_tags] -= 1.0
    dtr = np.zeros_like(model.params["trans"])
    dtr[model.bos, :K] += unary[0]
    dtr[model.bos, gold_tags[0]] -= 1.0
    dtr[:K, model.eos] += unary[-1]
    dtr[gold_tags[-1], model.eos] -= 1.0
    for t in range(T - 1):
        dtr[:K, :K] += pairwise[t]
        dtr[gold_tags[t], gold_tags[t + 1]] -= 1.0
    return nll, {"emissions": dE, "trans": dtr}


def nll_and_parameter_gradients(model: CrfModel, inst: Instance) -> tuple[float, dict[str, np.ndarray]]:
    """Sentence NLL with gradients for every trainable parameter."""
    feats, cache = _input_features(model, inst)
    W = model.params["emission_w"]
    emissions = feats @ W.T + model.params["emission_b"]
    nll, lattice = nll_and_gradient(model, emissions, inst.tag_ids)
    dE = lattice["emissions"]
    grads: dict[str, np.ndarray] = {
        "emission_w": dE.T @ feats,
        "emission_b": dE.sum(axis=0),
        "trans": lattice["trans"],
    }
    dfeats = dE @ W
    if model.hidden:
        rnn_grads, dX = _rnn_backward(model.params, cache, dfeats)
        grads.update(rnn_grads)
    else:
        dX = dfeats
    if model.lookup_vocab is not None:
        dlookup = np.zeros_like(model.params["lookup"])
        np.add.at(dlookup, inst.token_ids, dX)
        grads["lookup"] = dlookup
    return nll, grads


def predict(model: CrfModel, insts: list[Instance]) -> list[list[str]]:
    out = []
    for inst in insts:
        path, _score = viterbi(model, emission_scores(model, inst))
        out.append([model.tags[i] for i in path])
    return out


def tag(model: CrfModel, token_sentences: list[list[str]], provider=None):
    """Tag raw sentences; returns treebank-style tagged tokens per sentence."""
    from .treebank import TaggedToken

    insts = make_instances(model, token_sentences, provider=provider)
    out = []
    for sent, tags in zip(token_sentences, predict(model, insts)):
        out.append([TaggedToken(w, t, "model") for w, t in zip(sent, tags)])
    return out


def token_accuracy(model: CrfModel, insts: list[Instance]) -> float:
    """Fraction of tokens tagged correctly (0..1); used for model selection."""
    correct = total = 0
    for inst in insts:
        path, _score = viterbi(model, emission_scores(model, inst))
        correct += int(np.sum(path == inst.tag_ids))
        total += len(inst.tokens)
    return correct / total if total else 0.0


# -- training ----------------------------------------------------------------


def lr_at(step: int, total_steps: int, base: float, warmup_fraction: float) -> float:
    """Linear warmup to base, then linear decay to zero."""
    if total_steps <= 0:
        return base
    warmup = total_steps * warmup_fraction
    if warmup > 0 and step < warmup:
        return base * (step + 1) / warmup
    if total_steps == warmup:
        return base
    return base * max(0.0, (total_steps - step) / (total_steps - warmup))


@dataclass
class TrainHistory:
    rows: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_val_accuracy: float = 0.0


def train(model: CrfModel, train_insts: list[Instance], val_insts: list[Instance],
          config: TrainingConfig) -> TrainHistory:
    """Minibatch training with best-on-validation model selection.

    Deterministic for a fixed config: shuffling, init, and updates all draw
    from the config seed.  With max_epochs=0 the initial model is returned.
    """
    if config.optimizer not in ("adaptive", "plain-sgd"):
        raise CrfError(f"unknown optimizer {config.optimizer!r}")
    rng = np.random.default_rng(config.seed)
    n = len(train_insts)
    steps_per_epoch = max(1, math.ceil(n / config.batch_size))
    total_steps = steps_per_epoch * config.max_epochs
    opt_m = {k: np.zeros_like(v) for k, v in model.params.items()}
    opt_v = {k: np.zeros_like(v) for k, v in model.params.items()}
    history = TrainHistory()
    best_params = copy.deepcopy(model.params)
    best_acc = -1.0
    step = 0
    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        epoch_nll = 0.0
        last_lr = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            acc_grads = {k: np.zeros_like(v) for k, v in model.params.items()}
            batch_nll = 0.0
            for idx in batch:
                nll, grads = nll_and_parameter_gradients(model, train_insts[idx])
                batch_nll += nll
                for k, g in grads.items():
                    acc_grads[k] += g
            scale = 1.0 / len(batch)
            lr = lr_at(step, total_steps, config.learning_rate, config.warmup_fraction)
            last_lr = lr
            if config.optimizer == "plain-sgd":
                for k in model.params:
                    model.params[k] -= lr * scale * acc_grads[k]
            else:
                step_t = step + 1
                for k in model.params:
                    g = scale * acc_grads[k]
                    opt_m[k] = 0.9 * opt_m[k] + 0.1 * g
                    opt_v[k] = 0.999 * opt_v[k] + 0.001 * g ** 2
                    mhat = opt_m[k] / (1.0 - 0.9 ** step_t)
                    vhat = opt_v[k] / (1.0 - 0.999 ** step_t)
                    model.params[k] -= lr * (mhat / (np.sqrt(vhat) + 1e-8)
                                             + config.weight_decay * model.params[k])
            epoch_nll += batch_nll
            step += 1
        val_acc = token_accuracy(model, val_insts)
        history.rows.append({
            "epoch": epoch,
            "train_nll": epoch_nll / max(n, 1),
            "val_accuracy": val_acc,
            "learning_rate": last_lr,
        })
        if val_acc > best_acc:
            best_acc = val_acc
            best_params = copy.deepcopy(model.params)
            history.best_epoch = epoch
    history.best_val_accuracy = max(best_acc, 0.0)
    model.params = best_params
    return history


# -- serialization -----------------------------------------------------------

_MAGIC = b"YKCRFMDL"
FORMAT_VERSION = 1


def save_model(model: CrfModel, path, embedding_source: dict,
               inventory_checksum: str) -> None:
    """Versioned binary container; parameter payload is little-endian float64."""
    names = sorted(model.params)
    header = {
        "version": FORMAT_VERSION,
        "tags": model.tags,
        "dim": model.dim,
        "hidden": model.hidden,
        "lookup_vocab": model.lookup_vocab,
        "embedding_source": embedding_source,
        "inventory_checksum": inventory_checksum,
        "arrays": [{"name": n, "shape": list(model.params[n].shape)} for n in names],
    }
    blob = json.dumps(header, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(model.params[n], dtype="<f8").tobytes())


def load_model(path, inventory_checksum: str | None = None) -> tuple[CrfModel, dict]:
    """Load a model file; verifies the inventory checksum when one is supplied."""
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise CrfError(f"{path}: not a model file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise CrfError(f"{path}: unsupported model version {version}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        params = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = fh.read(count * 8)
            params[spec["name"]] = np.frombuffer(data, dtype="<f8").astype(np.float64).reshape(shape)
    if inventory_checksum is not None and header["inventory_checksum"] != inventory_checksum:
        raise ChecksumMismatch(header["inventory_checksum"], inventory_checksum)
    model = CrfModel(header["tags"], header["dim"], params,
                     hidden=header["hidden"], lookup_vocab=header["lookup_vocab"])
    return model, header
