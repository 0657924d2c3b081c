"""File formats: CSV datasets, model archives, run manifests.

Datasets are header-less CSV with one sample per row (row i of the input
file pairs with row i of the output file); internally everything is
column-per-sample. A model archive is a directory with a key=value manifest,
one subdirectory of CSV matrices per retained sample, and the diagnostics
traces. Floats are written with repr precision so a save/load round trip is
bit exact.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .gibbs import PosteriorSamples, SamplerConfig
from .kernel import KernelSpec
from .model import Dataset, HyperParams, LatentState, ModelConfig

FORMAT_VERSION = "1"


class DataFormatError(Exception):
    """Malformed input file; message carries the row/column location."""


class PairingMismatch(DataFormatError):
    def __init__(self, n_x: int, n_y: int):
        super().__init__(f"input file has {n_x} rows but output file has {n_y}")
        self.n_x = n_x
        self.n_y = n_y


class ArchiveError(Exception):
    """Missing or inconsistent model archive contents."""


def fnv1a_64(data: bytes) -> str:
    """64-bit FNV-1a digest, hex encoded."""
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


def file_digest(path: str) -> str:
    with open(path, "rb") as fh:
        return fnv1a_64(fh.read())


def parse_csv_matrix(path: str) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for r, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DataFormatError(
                    f"{path}: row {r + 1} has {len(cells)} cells, expected {width}"
                )
            parsed = []
            for c, cell in enumerate(cells):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataFormatError(
                        f"{path}: non-numeric cell at row {r + 1}, column {c + 1}: {cell!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise DataFormatError(f"{path}: file holds no data rows")
    return np.array(rows, dtype=float)


def write_csv_matrix(path: str, m: np.ndarray):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        for row in m:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_dataset(x_path: str, y_path: str, standardize_x: bool = False) -> Dataset:
    """Read paired sample-per-row CSVs and transpose to column-per-sample.

    standardize_x optionally centers/scales the input features; it defaults
    off because no particular input normalization is assumed.
    """
    x_rows = parse_csv_matrix(x_path)
    y_rows = parse_csv_matrix(y_path)
    if x_rows.shape[0] != y_rows.shape[0]:
        raise PairingMismatch(x_rows.shape[0], y_rows.shape[0])
    x = x_rows.T
    if standardize_x:
        mu = x.mean(axis=1, keepdims=True)
        sd = x.std(axis=1, keepdims=True)
        x = (x - mu) / np.where(sd > 0, sd, 1.0)
    return Dataset(x=x, y=y_rows.T)


@dataclass
class RunManifest:
    """Everything needed to byte-reproduce a run."""

    command: str
    seed: int
    dict_size: int
    hyper: HyperParams
    burn_in: int
    collect: int
    thin: int
    kernel_kind: str
    eta: float
    jitter_applied: float
    n: int
    m_x: int
    m_y: int
    retained: int
    x_digest: str = ""
    y_digest: str = ""
    tool_version: str = FORMAT_VERSION

    def to_lines(self) -> list[str]:
        h = self.hyper
        kv = [
            ("command", self.command), ("seed", self.seed),
            ("dict_size", self.dict_size),
            ("a_s", h.a_s), ("b_s", h.b_s), ("a_xy", h.a_xy), ("b_xy", h.b_xy),
            ("a_x", h.a_x), ("b_x", h.b_x), ("a_y", h.a_y), ("b_y", h.b_y),
            ("burn_in", self.burn_in), ("collect", self.collect), ("thin", self.thin),
            ("kernel_kind", self.kernel_kind), ("eta", repr(self.eta)),
            ("jitter_applied", repr(self.jitter_applied)),
            ("n", self.n), ("m_x", self.m_x), ("m_y", self.m_y),
            ("retained", self.retained),
            ("x_digest", self.x_digest), ("y_digest", self.y_digest),
            ("tool_version", self.tool_version),
        ]
        return [f"{k}={v}" for k, v in kv]

    @classmethod
    def from_lines(cls, lines: list[str]) -> "RunManifest":
        kv = {}
        for line in lines:
            line = line.strip()
            if not line:
                continue
            if "=" not in line:
                raise ArchiveError(f"bad manifest line: {line!r}")
            k, v = line.split("=", 1)
            kv[k] = v
        try:
            hyper = HyperParams(
                float(kv["a_s"]), float(kv["b_s"]), float(kv["a_xy"]), float(kv["b_xy"]),
                float(kv["a_x"]), float(kv["b_x"]), float(kv["a_y"]), float(kv["b_y"]),
            )
            return cls(
                command=kv["command"], seed=int(kv["seed"]), dict_size=int(kv["dict_size"]),
                hyper=hyper, burn_in=int(kv["burn_in"]), collect=int(kv["collect"]),
                thin=int(kv["thin"]), kernel_kind=kv["kernel_kind"], eta=float(kv["eta"]),
                jitter_applied=float(kv["jitter_applied"]), n=int(kv["n"]),
                m_x=int(kv["m_x"]), m_y=int(kv["m_y"]), retained=int(kv["retained"]),
                x_digest=kv.get("x_digest", ""), y_digest=kv.get("y_digest", ""),
                tool_version=kv.get("tool_version", FORMAT_VERSION),
            )
        except KeyError as exc:
            raise ArchiveError(f"manifest is missing key {exc}") from None


_STATE_MATRICES = ("z", "s", "w", "dx", "dy")


def save_model(path: str, posterior: PosteriorSamples, manifest: RunManifest):
    """Write a model archive directory (manifest, per-sample matrices, traces)."""
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(manifest.to_lines()) + "\n")
    write_csv_matrix(os.path.join(path, "train_x.csv"), posterior.train_x)
    write_csv_matrix(os.path.join(path, "train_y.csv"), posterior.train_y)
    trace = np.column_stack([
        np.arange(1, len(posterior.log_density_trace) + 1),
        posterior.log_density_trace,
        posterior.accept_trace,
    ])
    with open(os.path.join(path, "trace.csv"), "w", encoding="utf-8") as fh:
        fh.write("sweep,log_density,accept_rate\n")
        for sweep, ld, ar in trace:
            fh.write(f"{int(sweep)},{repr(float(ld))},{repr(float(ar))}\n")
    write_csv_matrix(os.path.join(path, "accept_per_atom.csv"), posterior.mh_accept_per_atom)
    for l, st in enumerate(posterior.states):
        d = os.path.join(path, f"sample_{l}")
        os.makedirs(d, exist_ok=True)
        for name in _STATE_MATRICES:
            write_csv_matrix(os.path.join(d, f"{name}.csv"), getattr(st, name))
        write_csv_matrix(os.path.join(d, "gammas.csv"),
                         np.array([[st.gamma_s, st.gamma_xy, st.gamma_x, st.gamma_y]]))


def load_model(path: str) -> tuple[PosteriorSamples, RunManifest]:
    man_path = os.path.join(path, "manifest.txt")
    if not os.path.exists(man_path):
        raise ArchiveError(f"no manifest at {man_path}")
    with open(man_path, "r", encoding="utf-8") as fh:
        manifest = RunManifest.from_lines(fh.readlines())

    train_x = parse_csv_matrix(os.path.join(path, "train_x.csv"))
    train_y = parse_csv_matrix(os.path.join(path, "train_y.csv"))
    if train_x.shape != (manifest.m_x, manifest.n) or train_y.shape != (manifest.m_y, manifest.n):
        raise ArchiveError("training matrices disagree with the manifest dimensions")

    trace_ld, trace_ar = [], []
    with open(os.path.join(path, "trace.csv"), "r", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            _, ld, ar = line.strip().split(",")
            trace_ld.append(float(ld))
            trace_ar.append(float(ar))
    per_atom = parse_csv_matrix(os.path.join(path, "accept_per_atom.csv")).ravel()

    states = []
    for l in range(manifest.retained):
        d = os.path.join(path, f"sample_{l}")
        if not os.path.isdir(d):
            raise ArchiveError(f"archive misses sample_{l} (manifest says {manifest.retained})")
        mats = {name: parse_csv_matrix(os.path.join(d, f"{name}.csv")) for name in _STATE_MATRICES}
        k = manifest.dict_size
        if mats["z"].shape != (k, manifest.n) or mats["w"].shape != (manifest.n, k):
            raise ArchiveError(f"sample_{l} matrices disagree with the manifest dimensions")
        g = parse_csv_matrix(os.path.join(d, "gammas.csv")).ravel()
        states.append(LatentState(z=mats["z"], s=mats["s"], w=mats["w"],
                                  dx=mats["dx"], dy=mats["dy"],
                                  gamma_s=g[0], gamma_xy=g[1], gamma_x=g[2], gamma_y=g[3]))

    model_cfg = ModelConfig(dict_size=manifest.dict_size, hyper=manifest.hyper,
                            kernel=KernelSpec(kind=manifest.kernel_kind, eta=manifest.eta))
    sampler_cfg = SamplerConfig(burn_in=manifest.burn_in, collect=manifest.collect,
                                thin=manifest.thin, seed=manifest.seed)
    posterior = PosteriorSamples(
        states=states,
        mh_accept_rate=float(np.mean(trace_ar)) if trace_ar else 0.0,
        mh_accept_per_atom=per_atom,
        log_density_trace=trace_ld,
        accept_trace=trace_ar,
        train_x=train_x,
        train_y=train_y,
        model_cfg=model_cfg,
        sampler_cfg=sampler_cfg,
        eta=manifest.eta,
        jitter_applied=manifest.jitter_applied,
    )
    return posterior, manifest


def archive_digest(path: str) -> str:
    """Order-stable digest over every file in an archive directory."""
    parts = []
    for root, _, files in sorted(os.walk(path)):
        for name in sorted(files):
            full = os.path.join(root, name)
            rel = os.path.relpath(full, path)
            parts.append(rel + ":" + file_digest(full))
    return fnv1a_64("|".join(parts).encode())


def write_run_sidecar(out_path: str, command: str, settings: dict, inputs: dict):
    """key=value sidecar manifest next to a command's output file.

    Records the command, every setting, and input-file digests, enough to
    rerun the command bit-identically.
    """
    lines = [f"command={command}", f"tool_version={FORMAT_VERSION}"]
    lines += [f"{k}={v}" for k, v in settings.items()]
    lines += [f"digest_{k}={file_digest(v)}" for k, v in inputs.items()]
    with open(out_path + ".manifest.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
