"""Conditional tabular GAN with WGAN-GP training, training-by-sampling,
and optional marginal moment matching in a decorrelated feature space.

Variants: `ctgan` (no moment matching), `ctgan-raw` (moment matching on the
raw encoded features), `margctgan` (moment matching after PCA decorrelation).
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Schema, Table, schema_from_manifest, schema_to_manifest
from .netcore import (
    IDENTITY,
    LEAKY_RELU,
    RELU,
    AdamState,
    NetSpec,
    Network,
    OutputHeads,
    adam_step,
    gradient_penalty,
)
from .transform import DataTransformer

VARIANTS = ("ctgan", "margctgan", "ctgan-raw")

MODEL_MAGIC = b"MCTG"
MODEL_VERSION = 1


class SynthError(ValueError):
    """Synthesizer contract violation."""


# ---------------------------------------------------------------------------
# Conditional vectors

class CondSampler:
    """Training-by-sampling state for the categorical columns.

    Training draws pick a column uniformly and a category with probability
    proportional to log(1 + frequency); generation draws use the raw
    training frequencies instead.
    """

    def __init__(self, table: Table | None, counts: list[np.ndarray] | None = None,
                 col_names: list[str] | None = None):
        if table is not None:
            schema = table.schema
            col_names = list(schema.categorical_names)
            counts = []
            self.rows: list[list[np.ndarray]] | None = []
            for name in col_names:
                codes = table.categorical_codes(name)
                card = schema.column(name).cardinality
                counts.append(np.bincount(codes, minlength=card).astype(np.int64))
                self.rows.append([np.flatnonzero(codes == k) for k in range(card)])
        else:
            self.rows = None
        self.col_names = col_names
        self.counts = counts
        self.widths = [len(c) for c in counts]
        self.offsets = np.concatenate([[0], np.cumsum(self.widths)]).astype(np.int64)
        self.total_width = int(self.offsets[-1])
        self.train_probs = []
        self.orig_probs = []
        for c in counts:
            logp = np.where(c > 0, np.log1p(c), 0.0)
            self.train_probs.append(logp / logp.sum() if logp.sum() > 0 else logp)
            total = c.sum()
            self.orig_probs.append(c / total if total > 0 else c.astype(np.float64))

    @property
    def n_columns(self) -> int:
        return len(self.col_names)

    def _cond_matrix(self, cols: np.ndarray, cats: np.ndarray) -> np.ndarray:
        cond = np.zeros((len(cols), self.total_width))
        cond[np.arange(len(cols)), self.offsets[cols] + cats] = 1.0
        return cond

    def _sample(self, batch, rng, probs):
        cols = rng.integers(0, self.n_columns, size=batch)
        cats = np.empty(batch, dtype=np.int64)
        for c in range(self.n_columns):
            mask = cols == c
            m = int(mask.sum())
            if m:
                cats[mask] = rng.choice(self.widths[c], size=m, p=probs[c])
        return self._cond_matrix(cols, cats), cols, cats

    def sample_train(self, batch: int, rng) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
        if self.total_width == 0:
            return np.zeros((batch, 0)), None, None
        return self._sample(batch, rng, self.train_probs)

    def sample_original(self, batch: int, rng) -> np.ndarray:
        if self.total_width == 0:
            return np.zeros((batch, 0))
        return self._sample(batch, rng, self.orig_probs)[0]

    def forced(self, batch: int, col: int, cat: int) -> np.ndarray:
        if not (0 <= col < self.n_columns) or not (0 <= cat < self.widths[col]):
            raise SynthError("forced condition out of range")
        return self._cond_matrix(np.full(batch, col), np.full(batch, cat))

    def matching_rows(self, cols: np.ndarray, cats: np.ndarray, rng) -> np.ndarray:
        """Uniform draw among training rows holding each requested category."""
        if self.rows is None:
            raise SynthError("sampler was restored without row indices")
        out = np.empty(len(cols), dtype=np.int64)
        for c in range(self.n_columns):
            for k in range(self.widths[c]):
                mask = (cols == c) & (cats == k)
                m = int(mask.sum())
                if m:
                    pool = self.rows[c][k]
                    out[mask] = pool[rng.integers(0, len(pool), size=m)]
        return out

    def state(self) -> dict:
        return {
            "columns": [
                {"name": n, "counts": c.tolist()}
                for n, c in zip(self.col_names, self.counts)
            ]
        }

    @classmethod
    def from_state(cls, state: dict) -> "CondSampler":
        return cls(
            None,
            counts=[np.asarray(c["counts"], dtype=np.int64) for c in state["columns"]],
            col_names=[c["name"] for c in state["columns"]],
        )


def sample_cond_vector(cs: CondSampler, batch: int, rng):
    """One training-by-sampling draw: (cond matrix, column idx, category idx)."""
    return cs.sample_train(batch, rng)


# ---------------------------------------------------------------------------
# Decorrelating feature map

@dataclass(frozen=True)
class PcaTransform:
    """f(x) = W^T (x - mu); W orthonormal, no down-projection."""

    mu: np.ndarray
    w: np.ndarray
    rank: int

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mu) @ self.w


def identity_transform(width: int) -> PcaTransform:
    return PcaTransform(np.zeros(width), np.eye(width), width)


def fit_pca(encoded: np.ndarray) -> PcaTransform:
    """Eigendecomposition of the sample covariance, descending eigenvalues,
    each eigenvector's largest-magnitude entry made positive."""
    x = np.asarray(encoded, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise SynthError("PCA needs at least 2 rows")
    mu = x.mean(axis=0)
    xc = x - mu
    cov = xc.T @ xc / (x.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    for j in range(evecs.shape[1]):
        i = int(np.argmax(np.abs(evecs[:, j])))
        if evecs[i, j] < 0:
            evecs[:, j] = -evecs[:, j]
    top = max(float(evals[0]), 0.0)
    rank = int((evals > 1e-10 * top).sum()) if top > 0 else 0
    return PcaTransform(mu, evecs, rank)


# ---------------------------------------------------------------------------
# Losses

def batch_moments(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension mean and population standard deviation (divisor n)."""
    x = np.asarray(features, dtype=np.float64)
    return x.mean(axis=0), x.std(axis=0)


def marg_loss(real: np.ndarray, fake: np.ndarray, f: PcaTransform | None = None) -> float:
    """||mean(f(real)) - mean(f(fake))||_2 + ||std(f(real)) - std(f(fake))||_2."""
    return marg_loss_grad(real, fake, f)[0]


def marg_loss_grad(
    real: np.ndarray, fake: np.ndarray, f: PcaTransform | None = None
) -> tuple[float, np.ndarray]:
    """Moment-matching loss and its gradient w.r.t. the fake batch only."""
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    if real.ndim != 2 or fake.ndim != 2 or real.shape[1] != fake.shape[1]:
        raise SynthError("real/fake feature width mismatch")
    zr = f.apply(real) if f is not None else real
    zf = f.apply(fake) if f is not None else fake
    mr, sr = batch_moments(zr)
    mf, sf = batch_moments(zf)
    dmean = mf - mr
    dstd = sf - sr
    nm = float(np.linalg.norm(dmean))
    ns = float(np.linalg.norm(dstd))
    loss = nm + ns

    n = fake.shape[0]
    dz = np.zeros_like(zf)
    if nm > 0.0:
        dz += dmean / (n * nm)
    if ns > 0.0:
        safe = np.where(sf > 0.0, sf, 1.0)
        coef = np.where(sf > 0.0, dstd / (ns * safe), 0.0)
        dz += (zf - mf) * coef / n
    dfake = dz @ f.w.T if f is not None else dz
    return loss, dfake


def cond_loss(soft: np.ndarray, cat_spans, cols, cats) -> float:
    """Mean cross-entropy of each row's conditioned span vs its target."""
    return cond_loss_grad(soft, cat_spans, cols, cats)[0]


def cond_loss_grad(soft: np.ndarray, cat_spans, cols, cats) -> tuple[float, np.ndarray]:
    soft = np.asarray(soft, dtype=np.float64)
    if cols is None or len(cat_spans) == 0:
        return 0.0, np.zeros_like(soft)
    n = soft.shape[0]
    starts = np.array([s for s, _ in cat_spans], dtype=np.int64)
    slots = starts[cols] + cats
    p = np.maximum(soft[np.arange(n), slots], 1e-12)
    loss = float(np.mean(-np.log(p)))
    dsoft = np.zeros_like(soft)
    dsoft[np.arange(n), slots] = -1.0 / (n * p)
    return loss, dsoft


# ---------------------------------------------------------------------------
# Configuration and model

@dataclass(frozen=True)
class TrainConfig:
    variant: str
    seed: int
    epochs: int = 300
    batch: int = 500
    lam: float = 10.0
    critic_steps: int = 1
    latent: int = 128
    gen_hidden: tuple[int, ...] = (256, 256)
    critic_hidden: tuple[int, ...] = (256, 256)
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.9
    tau: float = 0.2
    max_modes: int = 10

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise SynthError(f"unknown variant {self.variant!r}")
        if self.epochs < 1:
            raise SynthError("epochs must be >= 1")
        if self.batch < 2 or self.batch % 2 != 0:
            raise SynthError("batch must be a positive even number")
        if self.critic_steps < 1:
            raise SynthError("critic_steps must be >= 1")
        if self.latent < 1:
            raise SynthError("latent width must be >= 1")
        if self.tau <= 0:
            raise SynthError("tau must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gen_hidden"] = list(self.gen_hidden)
        d["critic_hidden"] = list(self.critic_hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["gen_hidden"] = tuple(d["gen_hidden"])
        d["critic_hidden"] = tuple(d["critic_hidden"])
        return cls(**d)


@dataclass
class SynthModel:
    schema: Schema
    transformer: DataTransformer
    config: TrainConfig
    gen: Network
    critic: Network
    heads: OutputHeads
    cond: CondSampler
    pca: PcaTransform | None
    trace: dict[str, list[float]] = field(default_factory=dict)

    def sample(self, n: int, rng: np.random.Generator,
               condition: tuple[str, str] | None = None) -> Table:
        """Draw n rows: standard-normal latents, frequency-sampled (or
        forced) conditions, hard one-hot spans, decoded to original units."""
        if n <= 0:
            raise SynthError("sample size must be positive")
        forced_col = forced_cat = None
        if condition is not None:
            name, label = condition
            if name not in self.schema.categorical_names:
                raise SynthError(f"unknown categorical column {name!r}")
            forced_col = self.cond.col_names.index(name)
            cats = self.schema.column(name).categories
            if label not in cats:
                raise SynthError(f"unknown category {label!r} for column {name!r}")
            forced_cat = cats.index(label)

        batch = self.config.batch
        chunks = []
        produced = 0
        while produced < n:
            if forced_col is not None:
                c = self.cond.forced(batch, forced_col, forced_cat)
            else:
                c = self.cond.sample_original(batch, rng)
            z = rng.normal(size=(batch, self.config.latent))
            raw, _ = self.gen.forward(np.concatenate([z, c], axis=1))
            hard, _ = self.heads.apply(raw, rng, hard=True)
            chunks.append(hard)
            produced += batch
        mat = np.concatenate(chunks, axis=0)[:n]
        return self.transformer.inverse_transform(mat)


# ---------------------------------------------------------------------------
# Training

def _gen_spec(config: TrainConfig, cond_width: int, enc_width: int) -> NetSpec:
    widths = (*config.gen_hidden, enc_width)
    acts = (RELU,) * len(config.gen_hidden) + (IDENTITY,)
    return NetSpec(config.latent + cond_width, widths, acts)


def _critic_spec(config: TrainConfig, cond_width: int, enc_width: int) -> NetSpec:
    widths = (*config.critic_hidden, 1)
    acts = (LEAKY_RELU,) * len(config.critic_hidden) + (IDENTITY,)
    return NetSpec(enc_width + cond_width, widths, acts)


def train(table: Table, config: TrainConfig) -> SynthModel:
    """Alternating WGAN-GP training, deterministic given config.seed.

    The critic minimizes mean(D(fake)) - mean(D(real)) + penalty; the
    generator minimizes -mean(D(fake)) + cond_loss + marg_loss, where the
    moment term is dropped for `ctgan` and uses an identity feature map for
    `ctgan-raw`. The moment term compares the generated batch against the
    real batch of the most recent critic step.
    """
    if table.n_rows == 0:
        raise SynthError("cannot train on an empty table")
    rng = np.random.default_rng(config.seed)

    transformer = DataTransformer(max_modes=config.max_modes).fit(table, rng)
    enc = transformer.transform(table, rng)
    layout = transformer.layout
    width = layout.width
    cond = CondSampler(table)
    cwidth = cond.total_width

    if config.variant == "margctgan":
        if table.n_rows < width:
            warnings.warn(
                f"training rows ({table.n_rows}) < encoded width ({width}): "
                "the covariance is rank-deficient and PCA-space moment matching "
                "may degrade; consider variant 'ctgan-raw'",
                stacklevel=2,
            )
        f = fit_pca(enc)
    elif config.variant == "ctgan-raw":
        f = identity_transform(width)
    else:
        f = None

    gen = Network(_gen_spec(config, cwidth, width), rng)
    critic = Network(_critic_spec(config, cwidth, width), rng)
    heads = OutputHeads(layout.tanh_slots(), layout.onehot_spans(), width, tau=config.tau)
    spans_by_name = layout.categorical_spans()
    cat_spans = [spans_by_name[name] for name in table.schema.categorical_names]

    g_state = AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2)
    c_state = AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2)

    batch = config.batch
    steps = max(1, table.n_rows // batch)
    ones = np.full((batch, 1), 1.0 / batch)
    trace = {k: [] for k in ("critic", "wasserstein", "generator", "cond", "marg")}
    real_ref = enc[:batch]

    for epoch in range(config.epochs):
        acc = {k: 0.0 for k in trace}
        for _ in range(steps):
            for _ in range(config.critic_steps):
                c1, cols, cats = cond.sample_train(batch, rng)
                z = rng.normal(size=(batch, config.latent))
                raw, _ = gen.forward(np.concatenate([z, c1], axis=1))
                fake, _ = heads.apply(raw, rng)
                perm = rng.permutation(batch)
                if cwidth:
                    rows = cond.matching_rows(cols[perm], cats[perm], rng)
                    c2 = c1[perm]
                else:
                    rows = rng.integers(0, table.n_rows, size=batch)
                    c2 = c1
                real = enc[rows]
                real_in = np.concatenate([real, c2], axis=1)
                fake_in = np.concatenate([fake, c1], axis=1)

                yf, cache_f = critic.forward(fake_in)
                yr, cache_r = critic.forward(real_in)
                gf, _ = critic.backward(cache_f, ones)
                gr, _ = critic.backward(cache_r, -ones)
                pen, gp = gradient_penalty(critic, real_in, fake_in, rng, config.lam)
                total = gf.add(gr).add(gp)
                adam_step(critic.parameters(), total.arrays(), c_state)

                real_ref = real
                acc["critic"] += float(yf.mean() - yr.mean()) + pen
                acc["wasserstein"] += float(yr.mean() - yf.mean())

            c1, cols, cats = cond.sample_train(batch, rng)
            z = rng.normal(size=(batch, config.latent))
            raw, g_cache = gen.forward(np.concatenate([z, c1], axis=1))
            soft, h_cache = heads.apply(raw, rng)
            y, cache_fk = critic.forward(np.concatenate([soft, c1], axis=1))
            adv = float(-y.mean())
            _, dx = critic.backward(cache_fk, -ones)
            dsoft = dx[:, :width]

            cl = 0.0
            if cwidth:
                cl, dcond = cond_loss_grad(soft, cat_spans, cols, cats)
                dsoft = dsoft + dcond
            ml = 0.0
            if f is not None:
                ml, dmarg = marg_loss_grad(real_ref, soft, f)
                dsoft = dsoft + dmarg

            draw = heads.backward(h_cache, dsoft)
            g_grads, _ = gen.backward(g_cache, draw)
            adam_step(gen.parameters(), g_grads.arrays(), g_state)

            acc["generator"] += adv + cl + ml
            acc["cond"] += cl
            acc["marg"] += ml

        c_steps = steps * config.critic_steps
        trace["critic"].append(acc["critic"] / c_steps)
        trace["wasserstein"].append(acc["wasserstein"] / c_steps)
        for k in ("generator", "cond", "marg"):
            trace[k].append(acc[k] / steps)
        if not all(np.isfinite(trace[k][-1]) for k in trace):
            raise SynthError(f"non-finite loss at epoch {epoch}: "
                             + ", ".join(f"{k}={trace[k][-1]:.4g}" for k in trace))

    return SynthModel(
        schema=table.schema,
        transformer=transformer,
        config=config,
        gen=gen,
        critic=critic,
        heads=heads,
        cond=cond,
        pca=f,
        trace=trace,
    )


# ---------------------------------------------------------------------------
# Serialization

def _array_entries(model: SynthModel) -> list[tuple[str, np.ndarray]]:
    entries = []
    for prefix, net in (("gen", model.gen), ("critic", model.critic)):
        for i, w in enumerate(net.weights):
            entries.append((f"{prefix}_w{i}", w))
        for i, b in enumerate(net.biases):
            entries.append((f"{prefix}_b{i}", b))
    if model.pca is not None and model.config.variant == "margctgan":
        entries.append(("pca_mu", model.pca.mu))
        entries.append(("pca_w", model.pca.w))
    return entries


def save_model(model: SynthModel, path) -> None:
    entries = _array_entries(model)
    if model.pca is None:
        pca_info = {"kind": "none"}
    elif model.config.variant == "ctgan-raw":
        pca_info = {"kind": "identity", "rank": model.pca.rank}
    else:
        pca_info = {"kind": "fitted", "rank": model.pca.rank}
    header = {
        "schema": schema_to_manifest(model.schema),
        "transformer": model.transformer.state(),
        "config": model.config.to_dict(),
        "cond": model.cond.state(),
        "pca": pca_info,
        "trace": model.trace,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in entries],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", MODEL_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, a in entries:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_model(path) -> SynthModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16 or data[:4] != MODEL_MAGIC:
        raise SynthError("not a synthesizer model file")
    (version,) = struct.unpack("<I", data[4:8])
    if version != MODEL_VERSION:
        raise SynthError(f"unsupported model format version {version}")
    (hlen,) = struct.unpack("<Q", data[8:16])
    if len(data) < 16 + hlen:
        raise SynthError("truncated model file")
    header = json.loads(data[16 : 16 + hlen].decode("utf-8"))

    schema = schema_from_manifest(header["schema"])
    transformer = DataTransformer.from_state(header["transformer"], schema)
    config = TrainConfig.from_dict(header["config"])
    cond = CondSampler.from_state(header["cond"])

    arrays = {}
    offset = 16 + hlen
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        nbytes = int(np.prod(shape)) * 8
        if len(data) < offset + nbytes:
            raise SynthError("truncated model file")
        arrays[entry["name"]] = np.frombuffer(
            data, dtype="<f8", count=int(np.prod(shape)), offset=offset
        ).reshape(shape).copy()
        offset += nbytes

    width = transformer.layout.width
    cwidth = cond.total_width
    rng = np.random.default_rng(0)
    gen = Network(_gen_spec(config, cwidth, width), rng)
    critic = Network(_critic_spec(config, cwidth, width), rng)
    n_g = gen.n_layers
    n_c = critic.n_layers
    try:
        gen.set_parameters(
            [arrays[f"gen_w{i}"] for i in range(n_g)]
            + [arrays[f"gen_b{i}"] for i in range(n_g)]
        )
        critic.set_parameters(
            [arrays[f"critic_w{i}"] for i in range(n_c)]
            + [arrays[f"critic_b{i}"] for i in range(n_c)]
        )
    except KeyError as exc:
        raise SynthError(f"missing parameter blob {exc.args[0]!r}") from None

    pca_info = header["pca"]
    if pca_info["kind"] == "none":
        pca = None
    elif pca_info["kind"] == "identity":
        pca = identity_transform(width)
    else:
        pca = PcaTransform(arrays["pca_mu"], arrays["pca_w"], pca_info["rank"])

    heads = OutputHeads(
        transformer.layout.tanh_slots(),
        transformer.layout.onehot_spans(),
        width,
        tau=config.tau,
    )
    return SynthModel(
        schema=schema,
        transformer=transformer,
        config=config,
        gen=gen,
        critic=critic,
        heads=heads,
        cond=cond,
        pca=pca,
        trace=header["trace"],
    )
