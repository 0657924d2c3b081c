"""Command-line interface.

Subcommands: train, predict, evaluate, cv, synth, diagnose, bench.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .archive import (ArchiveError, DataFormatError, RunManifest, file_digest,
                      load_dataset, load_model, parse_csv_matrix, save_model,
                      write_csv_matrix, write_run_sidecar)
from .evaluate import (CvGrid, SyntheticSpec, complexity_benchmark, cross_validate,
                       evaluate, make_synthetic)
from .gibbs import SamplerConfig, train
from .kernel import DegenerateBandwidth, IllConditionedGram, KernelSpec
from .mathcore import NotPositiveDefinite, RngStream
from .model import HyperParams, ModelConfig
from .oracles import GewekeConfig, geweke_run
from .predict import NoLikelihoodSupport, PredictionConfig, predict

USAGE_ERROR, DATA_ERROR, NUMERICAL_ERROR = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; the contract here is exit 1
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(USAGE_ERROR)


def _build_parser() -> _Parser:
    p = _Parser(prog="bcdl", description="Bayesian coupled dictionary learning")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run MCMC training and save a model archive")
    t.add_argument("--x", required=True)
    t.add_argument("--y", required=True)
    t.add_argument("--dict-size", type=int, required=True)
    t.add_argument("--burn-in", type=int, default=700)
    t.add_argument("--collect", type=int, default=500)
    t.add_argument("--thin", type=int, default=1)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--eta", default="auto", help="kernel bandwidth, 'auto' or a number")
    t.add_argument("--hyper", type=float, default=1e-6,
                   help="value for all eight Gamma hyper-parameters")
    t.add_argument("--standardize-x", action="store_true")
    t.add_argument("--out", required=True)

    pr = sub.add_parser("predict", help="predict outputs for new inputs")
    pr.add_argument("--model", required=True)
    pr.add_argument("--x", required=True)
    pr.add_argument("--neighbors", type=int, default=5)
    pr.add_argument("--mean-variant", choices=["normalized", "paper-literal"],
                    default="normalized")
    pr.add_argument("--num-samples", type=int, default=None)
    pr.add_argument("--seed", type=int, default=None,
                    help="prediction draw seed (defaults to the model seed)")
    pr.add_argument("--out", required=True)

    ev = sub.add_parser("evaluate", help="per-frame RMS of predictions on labeled data")
    ev.add_argument("--model", required=True)
    ev.add_argument("--x", required=True)
    ev.add_argument("--y", required=True)
    ev.add_argument("--neighbors", type=int, default=5)
    ev.add_argument("--seed", type=int, default=None)
    ev.add_argument("--out", required=True)

    cv = sub.add_parser("cv", help="cross-validate dictionary size and neighbor count")
    cv.add_argument("--x", required=True)
    cv.add_argument("--y", required=True)
    cv.add_argument("--k-grid", default="64,128,196,256")
    cv.add_argument("--j-grid", default="3,5,7")
    cv.add_argument("--folds", type=int, default=5)
    cv.add_argument("--burn-in", type=int, default=700)
    cv.add_argument("--collect", type=int, default=500)
    cv.add_argument("--thin", type=int, default=1)
    cv.add_argument("--seed", type=int, default=0)
    cv.add_argument("--hyper", type=float, default=1e-6)
    cv.add_argument("--out", required=True)

    sy = sub.add_parser("synth", help="generate a synthetic dataset")
    sy.add_argument("--n", type=int, required=True)
    sy.add_argument("--mx", type=int, required=True)
    sy.add_argument("--my", type=int, required=True)
    sy.add_argument("--dict-size", type=int, required=True)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--gamma-s", type=float, default=1.0)
    sy.add_argument("--gamma-xy", type=float, default=45.0)
    sy.add_argument("--gamma-x", type=float, default=1.0)
    sy.add_argument("--gamma-y", type=float, default=0.25)
    sy.add_argument("--out-prefix", required=True)

    dg = sub.add_parser("diagnose", help="sampler correctness diagnostics")
    dg.add_argument("--mode", choices=["geweke", "oracle", "acceptance"], required=True)
    dg.add_argument("--cycles", type=int, default=20000)
    dg.add_argument("--seed", type=int, default=0)
    dg.add_argument("--out", required=True)

    be = sub.add_parser("bench", help="per-sweep timing and complexity slopes")
    be.add_argument("--seed", type=int, default=0)
    be.add_argument("--n-grid", default="1024,2048,4096",
                    help="sizes for the isolated Gram-inverse timing")
    be.add_argument("--k-grid", default="256,512,1024",
                    help="dictionary sizes for the per-sweep timing")
    be.add_argument("--out", required=True)
    return p


def _sampler_cfg(args) -> SamplerConfig:
    return SamplerConfig(burn_in=args.burn_in, collect=args.collect,
                         thin=args.thin, seed=args.seed)


def _cmd_train(args) -> int:
    data = load_dataset(args.x, args.y, standardize_x=args.standardize_x)
    eta = "auto" if args.eta == "auto" else float(args.eta)
    cfg = ModelConfig(dict_size=args.dict_size, hyper=HyperParams.uniform(args.hyper),
                      kernel=KernelSpec(eta=eta))
    posterior = train(data, cfg, _sampler_cfg(args))
    manifest = RunManifest(
        command="train", seed=args.seed, dict_size=args.dict_size, hyper=cfg.hyper,
        burn_in=args.burn_in, collect=args.collect, thin=args.thin,
        kernel_kind="exponential", eta=posterior.eta,
        jitter_applied=posterior.jitter_applied,
        n=data.n, m_x=data.m_x, m_y=data.m_y, retained=len(posterior),
        x_digest=file_digest(args.x), y_digest=file_digest(args.y),
    )
    save_model(args.out, posterior, manifest)
    print(f"trained K={args.dict_size} on N={data.n}; "
          f"MH acceptance {posterior.mh_accept_rate:.3f}; archive at {args.out}")
    return 0


def _predict_cfg(args) -> PredictionConfig:
    variant = "normalized-mixture" if args.mean_variant == "normalized" else "paper-literal"
    return PredictionConfig(j_neighbors=args.neighbors, num_samples=args.num_samples,
                            mean_variant=variant)


def _cmd_predict(args) -> int:
    posterior, manifest = load_model(args.model)
    x = parse_csv_matrix(args.x).T  # sample-per-row on disk
    seed = manifest.seed if args.seed is None else args.seed
    cfg = _predict_cfg(args)
    rows = []
    for t in range(x.shape[1]):
        res = predict(posterior, posterior.train_x, x[:, t], cfg,
                      RngStream(seed, (31, t)))
        rows.append(np.concatenate([[t, res.effective_sample_size], res.y_hat]))
    with open(args.out, "w", encoding="utf-8") as fh:
        m_y = len(rows[0]) - 2
        fh.write("frame,ess," + ",".join(f"y{j}" for j in range(m_y)) + "\n")
        for row in rows:
            fh.write(f"{int(row[0])}," + ",".join(repr(float(v)) for v in row[1:]) + "\n")
    write_run_sidecar(args.out, "predict",
                      {"model": args.model, "neighbors": args.neighbors,
                       "mean_variant": args.mean_variant, "seed": seed,
                       "num_samples": args.num_samples},
                      {"x": args.x})
    print(f"wrote {len(rows)} predictions to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    posterior, manifest = load_model(args.model)
    data = load_dataset(args.x, args.y)
    seed = manifest.seed if args.seed is None else args.seed
    cfg = PredictionConfig(j_neighbors=args.neighbors)
    rep = evaluate(posterior, data, cfg, RngStream(seed, (37,)))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("frame,rms_degrees\n")
        for t, v in enumerate(rep.per_frame_rms):
            fh.write(f"{t},{repr(float(v))}\n")
        fh.write(f"mean,{repr(rep.mean_rms_degrees)}\n")
    write_run_sidecar(args.out, "evaluate",
                      {"model": args.model, "neighbors": args.neighbors, "seed": seed},
                      {"x": args.x, "y": args.y})
    print(f"mean RMS {rep.mean_rms_degrees:.4f} over {data.n} frames -> {args.out}")
    return 0


def _cmd_cv(args) -> int:
    data = load_dataset(args.x, args.y)
    grid = CvGrid(k_values=tuple(int(v) for v in args.k_grid.split(",")),
                  j_values=tuple(int(v) for v in args.j_grid.split(",")),
                  folds=args.folds)
    base = ModelConfig(dict_size=grid.k_values[0], hyper=HyperParams.uniform(args.hyper))
    best, table = cross_validate(data, grid, base, _sampler_cfg(args))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("K,j,mean_rms\n")
        for row in table:
            fh.write(f"{row['K']},{row['j']},{repr(row['mean_rms'])}\n")
        fh.write(f"best,{best[0]},{best[1]}\n")
    write_run_sidecar(args.out, "cv",
                      {"k_grid": args.k_grid, "j_grid": args.j_grid,
                       "folds": args.folds, "burn_in": args.burn_in,
                       "collect": args.collect, "thin": args.thin,
                       "seed": args.seed, "hyper": args.hyper},
                      {"x": args.x, "y": args.y})
    print(f"best (K, j) = {best} -> {args.out}")
    return 0


def _cmd_synth(args) -> int:
    spec = SyntheticSpec(k_true=args.dict_size, m_x=args.mx, m_y=args.my,
                         gamma_s=args.gamma_s, gamma_xy=args.gamma_xy,
                         gamma_x=args.gamma_x, gamma_y=args.gamma_y)
    data = make_synthetic(args.n, spec, KernelSpec(), RngStream(args.seed))
    write_csv_matrix(args.out_prefix + "_x.csv", data.x.T)
    write_csv_matrix(args.out_prefix + "_y.csv", data.y.T)
    write_run_sidecar(args.out_prefix + "_x.csv", "synth",
                      {"n": args.n, "mx": args.mx, "my": args.my,
                       "dict_size": args.dict_size, "seed": args.seed,
                       "gamma_s": args.gamma_s, "gamma_xy": args.gamma_xy,
                       "gamma_x": args.gamma_x, "gamma_y": args.gamma_y}, {})
    print(f"wrote {args.out_prefix}_x.csv and {args.out_prefix}_y.csv "
          f"({args.n} samples, {args.mx}/{args.my} features)")
    return 0


def _cmd_diagnose(args) -> int:
    if args.mode == "geweke":
        res = geweke_run(GewekeConfig(cycles=args.cycles), RngStream(args.seed))
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("statistic,z_score\n")
            for name, z in res["z_scores"].items():
                fh.write(f"{name},{repr(float(z))}\n")
        write_run_sidecar(args.out, "diagnose",
                          {"mode": "geweke", "cycles": args.cycles, "seed": args.seed}, {})
        status = "FLAGGED" if res["flagged"] else "ok"
        print(f"geweke max |z| = {res['max_abs_z']:.2f} ({status}) -> {args.out}")
        return 0
    if args.mode == "oracle":
        rows = _oracle_rows(args.seed)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("check,value,threshold,pass\n")
            for name, value, thr, ok in rows:
                fh.write(f"{name},{repr(float(value))},{repr(float(thr))},{int(ok)}\n")
        write_run_sidecar(args.out, "diagnose", {"mode": "oracle", "seed": args.seed}, {})
        bad = [r for r in rows if not r[3]]
        print(f"{len(rows) - len(bad)}/{len(rows)} oracle checks pass -> {args.out}")
        return 0
    rows = _acceptance_quick_rows(args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("check,value,threshold,pass\n")
        for name, value, thr, ok in rows:
            fh.write(f"{name},{repr(float(value))},{repr(float(thr))},{int(ok)}\n")
    write_run_sidecar(args.out, "diagnose", {"mode": "acceptance", "seed": args.seed}, {})
    bad = [r for r in rows if not r[3]]
    print(f"{len(rows) - len(bad)}/{len(rows)} quick acceptance checks pass -> {args.out}")
    return 0


def _tiny_fixture(seed: int):
    from .kernel import build_gram
    from .model import ancestral_sample

    cfg = ModelConfig(dict_size=2, hyper=HyperParams.uniform(2.0))
    rng = RngStream(seed)
    data, state = ancestral_sample(cfg, 4, 2, 2, rng,
                                   fixed_gammas={"gamma_s": 1.0, "gamma_xy": 4.0,
                                                 "gamma_x": 1.0, "gamma_y": 1.0})
    gram = build_gram(data.y, cfg.kernel)
    return cfg, data, state, gram, rng


def _oracle_rows(seed: int):
    from .gibbs import cond_sample_s, cond_theta_z
    from .model import joint_log_density
    from .oracles import GridSpec, enumerate_binary_conditional, grid_conditional, ks_statistic

    cfg, data, state, gram, rng = _tiny_fixture(seed)
    rows = []

    def joint_with_z(v):
        st = state.copy()
        st.z[0, 0] = v
        return joint_log_density(st, data, cfg, gram)

    theta_oracle = enumerate_binary_conditional(joint_with_z)
    theta_impl = cond_theta_z(state, data, 0, 0)
    rows.append(("z_theta_match", abs(theta_oracle - theta_impl), 1e-10,
                 abs(theta_oracle - theta_impl) < 1e-10))

    st = state.copy()
    st.z[0, 0] = 1.0

    def joint_with_s(v):
        s2 = st.copy()
        s2.s[0, 0] = v
        return joint_log_density(s2, data, cfg, gram)

    xs, dens = grid_conditional(joint_with_s, GridSpec(-8.0, 8.0, 1024))
    draws = np.array([cond_sample_s(st, data, 0, 0, rng.substream(1000 + i)) for i in range(4000)])
    ks = ks_statistic(draws, xs, dens)
    rows.append(("s_conditional_ks", ks, 0.05, ks < 0.05))
    return rows


def _acceptance_quick_rows(seed: int):
    from .gibbs import bound_log_value, tight_lambda
    from .mathcore import log_sigmoid

    rng = RngStream(seed)
    g = rng.gen
    z = np.where(g.random(1000) < 0.5, 1.0, -1.0)
    w = g.normal(0, 3, 1000)
    lam = g.uniform(1e-6, 1 - 1e-6, 1000)
    gap = bound_log_value(lam, z, w) - log_sigmoid(z * w)
    worst = float(gap.min())
    rows = [("bound_holds_min_gap", worst, 0.0, worst >= -1e-12)]
    lam_star = tight_lambda(z, w)
    eq = float(np.max(np.abs(bound_log_value(lam_star, z, w) - log_sigmoid(z * w))))
    rows.append(("bound_tight_at_lambda_star", eq, 1e-12, eq < 1e-12))
    return rows


def _cmd_bench(args) -> int:
    res = complexity_benchmark(
        n_grid=tuple(int(v) for v in args.n_grid.split(",")),
        k_grid=tuple(int(v) for v in args.k_grid.split(",")),
        seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("kind,size,seconds\n")
        for row in res["gram_inverse"]:
            fh.write(f"gram_inverse,{row['N']},{repr(row['seconds'])}\n")
        for row in res["sweep"]:
            fh.write(f"sweep,{row['K']},{repr(row['seconds'])}\n")
        fh.write(f"slope,gram_inverse_n,{repr(res['gram_inverse_slope_n'])}\n")
        fh.write(f"slope,sweep_k,{repr(res['sweep_slope_k'])}\n")
    write_run_sidecar(args.out, "bench",
                      {"seed": args.seed, "n_grid": args.n_grid, "k_grid": args.k_grid}, {})
    print(f"gram-inverse slope in N: {res['gram_inverse_slope_n']:.2f}; "
          f"sweep slope in K: {res['sweep_slope_k']:.2f} -> {args.out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "cv": _cmd_cv,
    "synth": _cmd_synth,
    "diagnose": _cmd_diagnose,
    "bench": _cmd_bench,
}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (DataFormatError, ArchiveError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except (IllConditionedGram, DegenerateBandwidth, NotPositiveDefinite,
            NoLikelihoodSupport) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
