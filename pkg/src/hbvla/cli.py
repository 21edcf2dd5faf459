"""Command-line front end.

Subcommands: quantize, dequantize, analyze, bench, probe.  Exit codes:
0 success, 2 usage/configuration, 3 input format, 4 numerical failure.
Failures emit one machine-parseable stderr line of the form
``hbvla: status=error kind=<usage|format|numerical> detail="..."``.
"""

import argparse
import csv
import json
import sys
from dataclasses import asdict

import numpy as np

from . import hbq
from .baselines import baseline_plain_sign
from .bench import load_suite, make_config, run_suite, write_csv, write_svg_charts
from .errors import (ConfigurationError, FormatError, HbvlaError,
                     NumericalError)
from .haar import haar_forward_rows, highpass_energy
from .permute import greedy_pair_and_chain, identity_ordering, pairwise_distances
from .pipeline import QuantConfig, quantize_layer
from .saliency import (PROJECTIONS, AttentionBlockWeights, column_scores,
                       finite_difference_check, projection_gradients,
                       rectified_hessian, token_importance)
from .tensor import read_tensor, write_tensor

_USAGE_EXIT, _FORMAT_EXIT, _NUMERICAL_EXIT = 2, 3, 4


def _error_record(kind: str, detail: str) -> None:
    detail = detail.replace('"', "'").replace("\n", " ")
    print(f'hbvla: status=error kind={kind} detail="{detail}"', file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _error_record("usage", message)
        self.print_usage(sys.stderr)
        raise SystemExit(_USAGE_EXIT)


def _load_matrix(path) -> np.ndarray:
    return np.asarray(read_tensor(path), dtype=np.float64)


def _load_config(path) -> QuantConfig:
    if path is None:
        return QuantConfig()
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("config JSON must be an object")
    return make_config(doc)


def _cmd_quantize(args) -> int:
    w = _load_matrix(args.weights)
    calib = _load_matrix(args.calib) if args.calib else None
    importance = None
    if args.importance:
        importance = _load_matrix(args.importance).ravel()
    cfg = _load_config(args.config)
    layer, report = quantize_layer(w, calib, importance, cfg)
    with open(args.out, "wb") as fh:
        fh.write(hbq.serialize_layer(layer))
    if args.report:
        doc = {"schema": "hbvla-report-v1", "fro_error": report.fro_error,
               "proxy_error": report.proxy_error,
               "weighted_proxy_error": report.weighted_proxy_error,
               "avg_bits": report.avg_bits,
               "avg_bits_signs_only": report.avg_bits_signs_only,
               "salient_count": report.salient_count,
               "timing_ms": report.timing_ms, "config": report.config}
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"hbvla: status=ok out={args.out} fro_error={report.fro_error:.6g} "
          f"avg_bits={report.avg_bits:.4f}")
    return 0


def _cmd_dequantize(args) -> int:
    with open(args.infile, "rb") as fh:
        layer = hbq.deserialize_layer(fh.read())
    write_tensor(layer.reconstruct(), args.out)
    print(f"hbvla: status=ok out={args.out} shape={layer.n}x{layer.m}")
    return 0


def _cmd_analyze(args) -> int:
    w = _load_matrix(args.weights)
    calib = _load_matrix(args.calib) if args.calib else None
    importance = None
    if args.importance:
        importance = _load_matrix(args.importance).ravel()
    hess = rectified_hessian(calib, importance) if calib is not None else None
    scores = column_scores(w, hess)
    rows = [("saliency_score", str(j), float(scores[j]))
            for j in range(w.shape[1])]
    norms = np.linalg.norm(w, axis=0)
    rows += [("column_l2", str(j), float(norms[j])) for j in range(w.shape[1])]
    if hess is not None:
        eig = np.linalg.eigvalsh(hess.h)
        rows.append(("hessian_condition", "", float(eig[-1] / max(eig[0], 1e-300))))
    table = pairwise_distances(w)
    greedy = greedy_pair_and_chain(table, norms)
    bands = haar_forward_rows(w, "paper")
    rows.append(("band_energy_lo", "", float(np.sum(bands.lo ** 2))))
    rows.append(("band_energy_hi", "",
                 highpass_energy(w, identity_ordering(w.shape[1]))))
    rows.append(("band_energy_hi_permuted", "", highpass_energy(w, greedy)))
    total = float(np.sum(w ** 2))
    for normalization in ("paper", "orthonormal"):
        b = haar_forward_rows(w, normalization)
        energy = float(np.sum(b.lo ** 2) + np.sum(b.hi ** 2))
        if b.leftover is not None:
            energy += float(np.sum(b.leftover ** 2))
        rows.append((f"fro_energy_ratio_{normalization}", "", energy / total))
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(("metric", "index", "value"))
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    return 0


def _cmd_bench(args) -> int:
    cases, base_cfg = load_suite(args.suite)
    rows = run_suite(cases, base_cfg)
    write_csv(rows, args.out)
    if args.svg:
        write_svg_charts(rows, args.svg)
    print(f"hbvla: status=ok out={args.out} rows={len(rows)}")
    return 0


def _cmd_probe(args) -> int:
    wq, wk, wv, wo = (_load_matrix(p) for p in args.attn)
    x = _load_matrix(args.x)
    wts = AttentionBlockWeights(wq, wk, wv, wo, args.heads)
    quantized = AttentionBlockWeights(
        baseline_plain_sign(wq), baseline_plain_sign(wk),
        baseline_plain_sign(wv), baseline_plain_sign(wo), args.heads)
    grads = projection_gradients(wts, quantized, x)
    rows = [token_importance(grads[p], p).a for p in PROJECTIONS]
    write_tensor(np.vstack(rows), args.out)
    worst = finite_difference_check(wts, quantized, x,
                                    samples_per_projection=args.fd_samples)
    print(f"hbvla: status=ok out={args.out} projections={','.join(PROJECTIONS)} "
          f"fd_max_rel_error={worst:.3e}")
    if worst > 1e-3:
        raise NumericalError(
            f"finite-difference check failed: max relative error {worst:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hbvla",
                     description="1-bit Haar-domain weight binarization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantize", help="binarize a weight matrix")
    p.add_argument("--weights", required=True)
    p.add_argument("--calib")
    p.add_argument("--importance")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=_cmd_quantize)

    p = sub.add_parser("dequantize", help="reconstruct a dense matrix")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dequantize)

    p = sub.add_parser("analyze",
                       help="saliency, Hessian, and band-energy report")
    p.add_argument("--weights", required=True)
    p.add_argument("--calib")
    p.add_argument("--importance")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("bench", help="run a benchmark suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("probe",
                       help="token importance from an attention block probe")
    p.add_argument("--attn", nargs=4, required=True,
                   metavar=("WQ", "WK", "WV", "WO"))
    p.add_argument("--x", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--heads", type=int, default=1)
    p.add_argument("--fd-samples", type=int, default=5)
    p.set_defaults(func=_cmd_probe)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else _USAGE_EXIT
    except (ConfigurationError,) as exc:
        _error_record("usage", str(exc))
        return _USAGE_EXIT
    except NumericalError as exc:
        _error_record("numerical", str(exc))
        return _NUMERICAL_EXIT
    except (FormatError, HbvlaError, FileNotFoundError) as exc:
        _error_record("format", str(exc))
        return _FORMAT_EXIT


if __name__ == "__main__":
    sys.exit(main())
