"""Command-line surface: fuse, gradcheck, train-toy, eval.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
failure.  All output files are written to a temp path and renamed into
place, so a failing run leaves no partial artifacts.  Every command takes
--seed and is byte-deterministic under it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import ops, tensor
from .attention import CoordAttention, MambaBlock
from .checkpoint import load_checkpoint, load_into_network, save_network
from .errors import ConfigError, FormatError, LabelError, NumericsError
from .formats import HyperCube, read_cube, read_pgm, read_ppm, write_cube, write_pgm
from .fusion import fit_pca, fuse, fuse_sample, project_hyper3
from .gradcheck import grad_check
from .layers import BatchNorm2d, Conv2d, LayerNormSeq
from .losses import combined_loss, cross_entropy_loss, dice_loss
from .metrics import confusion_matrix, report_from_confusion
from .network import ABLATION_NAMES, NetworkConfig, ablation_config, build_network
from .synthetic import generate_synthetic_dataset
from .tensor import Parameter, Tensor
from .train import TrainConfig, evaluate_dataset, train_toy

LOSS_THRESHOLD = 1e-6
BLOCK_THRESHOLD = 1e-4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _atomic_write(path: str, writer) -> None:
    tmp = f"{path}.tmp"
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _atomic_text(path: str, text: str) -> None:
    def writer(tmp):
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
    _atomic_write(path, writer)


# ---------------------------------------------------------------------------
# gradcheck blocks


def _weighted_square(y: Tensor, r: Tensor) -> Tensor:
    """mean((y * r)^2) with a fixed positive random weighting.

    The weighting breaks invariances (layer-norm shift/scale, softmax
    shift, residual symmetry) that would otherwise leave coordinates with
    near-zero gradients, where the relative-error formula amplifies
    finite-difference round-off.
    """
    w = ops.mul(y, r)
    return ops.mean_all(ops.mul(w, w))


def _healthy_params(module, rng: np.random.Generator) -> None:
    """Re-draw module parameters at unit activation scale for the check.

    The training init (sigma 0.02, zero biases) leaves channels nearly dead
    through ReLU, and dead coordinates have gradients at round-off scale.
    Gradient verification needs every coordinate alive, so weights get
    fan-scaled uniform draws and biases move off zero. The 2.5x factor keeps
    state-space delta gradients, which are third order in activation
    magnitude, well above finite-difference noise.
    """
    for p in module.parameters():
        leaf = p.name.rsplit(".", 1)[-1]
        if leaf == "gamma" or leaf == "d_skip":
            p.value.data[...] = rng.uniform(0.5, 1.5, size=p.shape)
        elif leaf in ("beta", "bias", "conv_bias", "fusion_raw"):
            p.value.data[...] = rng.uniform(-0.4, 0.4, size=p.shape)
        elif leaf == "a_log":
            p.value.data[...] = rng.uniform(-1.0, 0.5, size=p.shape)
        else:
            fan_in = int(np.prod(p.shape[1:])) if len(p.shape) > 1 else 1
            bound = 2.5 / np.sqrt(max(1, fan_in))
            p.value.data[...] = rng.uniform(-bound, bound, size=p.shape)


def _block_checks(seed: int, config_path: str | None):
    """(name, loss function, parameters, threshold) for every checked block."""
    rng = np.random.default_rng(seed)

    def uniform_param(name, shape):
        return Parameter(name, rng.uniform(-2.0, 2.0, size=shape))

    def weighting(shape):
        return Tensor(rng.uniform(0.5, 1.5, size=shape))

    checks = []

    conv = Conv2d("chk.conv", 3, 4, 3, rng, stride=2, padding=1)
    _healthy_params(conv, rng)
    conv_in = uniform_param("chk.conv.input", (1, 3, 6, 6))
    conv_r = weighting((1, 4, 3, 3))
    checks.append(("conv",
                   lambda: _weighted_square(conv(conv_in.value), conv_r),
                   conv.parameters() + [conv_in], BLOCK_THRESHOLD))

    bn = BatchNorm2d("chk.bn", 4)
    bn.set_training(False)
    _healthy_params(bn, rng)
    bn_in = uniform_param("chk.bn.input", (2, 4, 3, 3))
    bn_r = weighting((2, 4, 3, 3))
    checks.append(("batch_norm",
                   lambda: _weighted_square(bn(bn_in.value), bn_r),
                   bn.parameters() + [bn_in], BLOCK_THRESHOLD))

    ln = LayerNormSeq("chk.ln", 5)
    _healthy_params(ln, rng)
    ln_in = uniform_param("chk.ln.input", (2, 3, 5))
    ln_r = weighting((2, 3, 5))
    checks.append(("layer_norm",
                   lambda: _weighted_square(ln(ln_in.value), ln_r),
                   ln.parameters() + [ln_in], BLOCK_THRESHOLD))

    coord = CoordAttention("chk.coord", 4, 2, rng)
    coord.set_training(False)
    _healthy_params(coord, rng)
    coord_in = uniform_param("chk.coord.input", (1, 4, 4, 4))
    coord_r = weighting((1, 4, 4, 4))
    checks.append(("coord_attention",
                   lambda: _weighted_square(coord(coord_in.value), coord_r),
                   coord.parameters() + [coord_in], BLOCK_THRESHOLD))

    mamba = MambaBlock("chk.mamba", 3, 2, 3, rng)
    _healthy_params(mamba, rng)
    mamba_in = uniform_param("chk.mamba.input", (1, 3, 3, 3))
    mamba_r = weighting((1, 3, 3, 3))
    checks.append(("mamba_block",
                   lambda: _weighted_square(mamba(mamba_in.value), mamba_r),
                   mamba.parameters() + [mamba_in], BLOCK_THRESHOLD))

    scan_u = uniform_param("chk.scan.u", (1, 4, 2))
    scan_delta_raw = uniform_param("chk.scan.delta_raw", (1, 4, 2))
    scan_a_log = Parameter("chk.scan.a_log", rng.uniform(-1.0, 1.0, (2, 3)))
    scan_b = uniform_param("chk.scan.b", (1, 4, 3))
    scan_c = uniform_param("chk.scan.c", (1, 4, 3))
    scan_d = uniform_param("chk.scan.d_skip", (2,))
    scan_r = weighting((1, 4, 2))

    def scan_loss():
        a = ops.scale(ops.exp(scan_a_log.value), -1.0)
        delta = ops.softplus(scan_delta_raw.value)
        y = ops.ssm_scan(scan_u.value, delta, a, scan_b.value, scan_c.value,
                         scan_d.value)
        return _weighted_square(y, scan_r)

    checks.append(("ssm_scan", scan_loss,
                   [scan_u, scan_delta_raw, scan_a_log, scan_b, scan_c, scan_d],
                   BLOCK_THRESHOLD))

    wf_a = uniform_param("chk.wf.path_a", (1, 3, 2, 2))
    wf_b = uniform_param("chk.wf.path_b", (1, 3, 2, 2))
    wf_raw = uniform_param("chk.wf.raw", (2,))
    wf_r = weighting((1, 3, 2, 2))

    def wf_loss():
        w = ops.softmax(wf_raw.value, axis=0)
        term_a = ops.mul(wf_a.value, ops.reshape(ops.slice_axis(w, 0, 0, 1), (1, 1, 1, 1)))
        term_b = ops.mul(wf_b.value, ops.reshape(ops.slice_axis(w, 0, 1, 2), (1, 1, 1, 1)))
        return _weighted_square(ops.add(term_a, term_b), wf_r)

    checks.append(("weighted_fusion", wf_loss, [wf_a, wf_b, wf_raw], BLOCK_THRESHOLD))

    loss_logits = uniform_param("chk.loss.logits", (2, 3, 4, 4))
    loss_target = rng.integers(0, 3, size=(2, 4, 4))
    checks.append(("dice",
                   lambda: dice_loss(loss_logits.value, loss_target),
                   [loss_logits], LOSS_THRESHOLD))
    checks.append(("cross_entropy",
                   lambda: cross_entropy_loss(loss_logits.value, loss_target),
                   [loss_logits], LOSS_THRESHOLD))

    cfg = _gradcheck_network_config(seed, config_path)
    net = build_network(cfg)
    net.set_training(False)
    _healthy_params(net, rng)
    net_in = Parameter("chk.net.input",
                       rng.uniform(0.0, 1.0, (1, cfg.in_channels, 8, 8)))
    net_target = rng.integers(0, cfg.num_classes, size=(8, 8))
    checks.append(("network",
                   lambda: combined_loss(net.forward(net_in.value), net_target),
                   net.parameters() + [net_in], BLOCK_THRESHOLD))
    return checks


def _gradcheck_network_config(seed: int, config_path: str | None) -> NetworkConfig:
    overrides = {}
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as fh:
            try:
                overrides = json.load(fh)
            except json.JSONDecodeError as exc:
                raise FormatError(f"config file is not valid JSON: {exc}")
    fields = dict(in_channels=6, num_classes=3, widths=(4, 8),
                  use_comprehensive_attention=True, use_mamba=True,
                  use_weighted_fusion=True, reduction=2, state_dim=2,
                  conv_width=3, seed=seed)
    for key, value in overrides.items():
        if key not in fields:
            raise ConfigError(f"unknown config field {key!r}")
        fields[key] = tuple(value) if key == "widths" else value
    return NetworkConfig(**fields)


def cmd_gradcheck(args) -> int:
    if args.eps <= 0:
        raise UsageError(f"--eps must be positive, got {args.eps}")
    known_ops = {"conv2d", "ssm_scan", "dwconv1d", "batch_norm", "layer_norm",
                 "sigmoid", "silu", "softplus", "softmax", "add", "mul",
                 "matmul_seq", "bilinear_resize", "dice_loss", "cross_entropy"}
    if args.sabotage is not None and args.sabotage not in known_ops:
        raise UsageError(f"--sabotage expects one of {sorted(known_ops)}")
    if args.sabotage is not None:
        tensor.SABOTAGED_OPS.add(args.sabotage)
    try:
        failed = False
        for name, f, params, threshold in _block_checks(args.seed, args.config):
            err = grad_check(f, params, args.eps)
            status = "ok" if err < threshold else "FAIL"
            failed = failed or err >= threshold
            print(f"block={name} max_rel_err={err:.6e} threshold={threshold:.0e} {status}")
    finally:
        tensor.SABOTAGED_OPS.clear()
    return 3 if failed else 0


# ---------------------------------------------------------------------------
# fuse


def cmd_fuse(args) -> int:
    cube = read_cube(args.cube)
    rgb = read_ppm(args.rgb)
    model = fit_pca(cube)
    fused = fuse(rgb, project_hyper3(cube, model))
    _atomic_write(args.out, lambda tmp: write_cube(
        HyperCube(fused.data[0].astype(np.float32)), tmp))
    top = list(model.eigenvalues[:3]) + [0.0] * max(0, 3 - len(model.eigenvalues))
    lines = [f"variance_retained={model.variance_retained:.6f}"]
    lines += [f"eigenvalue_{i + 1}={top[i]:.6f}" for i in range(3)]
    for line in lines:
        print(line)
    if args.report is not None:
        _atomic_text(args.report, "".join(line + "\n" for line in lines))
    return 0


# ---------------------------------------------------------------------------
# train-toy


def _build_fused_dataset(seed, images, height, width, bands, classes):
    raw = generate_synthetic_dataset(seed, images, height, width, bands, classes)
    return raw, [(fuse_sample(cube, rgb)[0], mask) for cube, rgb, mask in raw]


def cmd_train_toy(args) -> int:
    if args.images < 1 or args.iters < 1:
        raise UsageError("--images and --iters must be >= 1")
    cfg = ablation_config(args.ablation, in_channels=6, num_classes=args.classes,
                          seed=args.seed)
    net = build_network(cfg)
    print(f"ablation={args.ablation}")
    print(f"parameters={net.num_parameters()}")
    _, dataset = _build_fused_dataset(args.seed, args.images, args.height,
                                      args.width, args.bands, args.classes)
    tc = TrainConfig(learning_rate=args.lr, iterations=args.iters)
    history = train_toy(net, dataset, tc)
    report = evaluate_dataset(net, dataset)
    _atomic_write(args.out, lambda tmp: save_network(tmp, net))
    _atomic_text(args.out + ".loss", "".join(f"{v:.6f}\n" for v in history))
    print(f"final_loss={history[-1]:.6f}")
    print(f"final_miou={report.miou:.6f}")
    print(f"final_pixel_accuracy={report.pixel_accuracy:.6f}")
    return 0


# ---------------------------------------------------------------------------
# eval


def _network_config_from_dict(raw: dict) -> NetworkConfig:
    fields = dict(raw)
    if "widths" in fields:
        fields["widths"] = tuple(fields["widths"])
    try:
        return NetworkConfig(**fields)
    except TypeError as exc:
        raise ConfigError(f"checkpoint config is malformed: {exc}")


def _eval_inputs(args, cfg: NetworkConfig) -> list[Tensor]:
    cubes = args.cube or []
    rgbs = args.rgb or []
    if cfg.in_channels == 6:
        if len(cubes) != len(args.mask) or len(rgbs) != len(args.mask):
            raise UsageError(
                "a 6-channel network needs one --cube and one --rgb per --mask")
        return [fuse_sample(read_cube(c), read_ppm(r))[0]
                for c, r in zip(cubes, rgbs)]
    if cfg.in_channels == 3:
        if rgbs and not cubes:
            if len(rgbs) != len(args.mask):
                raise UsageError("need one --rgb per --mask")
            return [read_ppm(r) for r in rgbs]
        if cubes and not rgbs:
            if len(cubes) != len(args.mask):
                raise UsageError("need one --cube per --mask")
            out = []
            for c in cubes:
                cube = read_cube(c)
                out.append(project_hyper3(cube, fit_pca(cube)))
            return out
        raise UsageError("a 3-channel network needs --rgb inputs or --cube inputs, not both")
    if len(cubes) != len(args.mask) or rgbs:
        raise UsageError(
            f"a {cfg.in_channels}-channel network needs one --cube per --mask and no --rgb")
    out = []
    for c in cubes:
        cube = read_cube(c)
        if cube.bands != cfg.in_channels:
            raise ConfigError(
                f"cube has {cube.bands} bands, network expects {cfg.in_channels}")
        out.append(Tensor(cube.data.astype(np.float64)[None]))
    return out


def cmd_eval(args) -> int:
    if not args.mask:
        raise UsageError("at least one --mask is required")
    raw_cfg, _ = load_checkpoint(args.ckpt)
    cfg = _network_config_from_dict(raw_cfg)
    net = build_network(cfg)
    load_into_network(args.ckpt, net)
    net.set_training(False)
    masks = [read_pgm(p, cfg.num_classes) for p in args.mask]
    if args.pred_out is not None and len(args.mask) != 1:
        raise UsageError("--pred-out needs exactly one input image")
    k = cfg.num_classes
    pooled = np.zeros((k, k), dtype=np.int64)
    if args.self_check:
        preds = masks
    else:
        inputs = _eval_inputs(args, cfg)
        preds = []
        for image, mask in zip(inputs, masks):
            if (mask.height, mask.width) != (image.shape[2], image.shape[3]):
                raise ConfigError(
                    f"mask {mask.height}x{mask.width} does not match input "
                    f"{image.shape[2]}x{image.shape[3]}")
            preds.append(net.predict(image))
    for pred, mask in zip(preds, masks):
        pooled += confusion_matrix(pred, mask, k)
    report = report_from_confusion(pooled)
    if args.pred_out is not None:
        _atomic_write(args.pred_out, lambda tmp: write_pgm(preds[0], tmp))
    for line in report.text_lines():
        print(line)
    print(",".join(["miou", f"{report.miou:.6f}",
                    "pixel_accuracy", f"{report.pixel_accuracy:.6f}"]))
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> _Parser:
    parser = _Parser(prog="fusionsort",
                     description="Desk-scale spectral-fusion segmentation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="PCA-reduce a cube, align to RGB, write 6 channels")
    p.add_argument("--cube", required=True)
    p.add_argument("--rgb", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("gradcheck", help="verify analytic gradients block by block")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON file overriding the network-check config")
    p.add_argument("--sabotage", help="test hook: corrupt one op's backward rule")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("train-toy", help="overfit a toy network on synthetic data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--images", type=int, default=10)
    p.add_argument("--iters", type=int, default=300)
    p.add_argument("--out", required=True)
    p.add_argument("--ablation", choices=ABLATION_NAMES, default="all")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--bands", type=int, default=9)
    p.add_argument("--classes", type=int, default=3)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("eval", help="run a checkpoint over images and report metrics")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--cube", action="append")
    p.add_argument("--rgb", action="append")
    p.add_argument("--mask", action="append", required=True)
    p.add_argument("--pred-out", dest="pred_out")
    p.add_argument("--self-check", dest="self_check", action="store_true",
                   help="score the ground truth against itself (metric sanity)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, LabelError, ConfigError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
