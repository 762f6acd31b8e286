"""Command-line interface: one subcommand per pipeline stage, plus
declarative pipeline execution and the web service.

Structured inputs (geometry, grid, simulate specs, pipeline configs) are
YAML documents; rasters and channel data travel as containers; ellipses
and prompts as small JSON documents.
"""

from __future__ import annotations

import argparse
import json
import sys

import yaml

from .containers import read_container, write_container
from .core import BINARY, ChannelData, Image2D, LabelMask
from .dualsos import (
    das_dual_sos,
    ellipse_from_text,
    ellipse_to_text,
    fit_ellipse_from_mask,
)
from .errors import PatkError
from .forward import medium_from_config, phantom_from_config, simulate, add_noise
from .maskops import (
    VesselCriteria,
    apply_mask,
    connected_components,
    mip,
    refine_vessels,
    region_stats,
    skin_band_mask,
    stack_volume,
)
from .pipeline import (
    geometry_from_config,
    grid_from_config,
    load_config,
    prompts_from_config,
    run_pipeline,
)
from .recon import das_reconstruct, expand_sparse_channels
from .segment import BuiltinParams, SegmentRequest, builtin_segment, remote_segment


def _load_yaml(path):
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f)


def _read_typed(path, want, what):
    obj = read_container(path)
    if not isinstance(obj, want):
        raise PatkError(f"{path} holds {type(obj).__name__}, expected {what}")
    return obj


def _write(obj, path):
    write_container(obj, path)
    print(path)


def cmd_simulate(args):
    spec = _load_yaml(args.spec)
    geometry = geometry_from_config(spec["geometry"])
    grid = grid_from_config(spec["grid"]) if "grid" in spec else None
    data = simulate(
        phantom_from_config(spec["phantom"]),
        geometry,
        medium_from_config(spec["medium"]),
        fs_hz=float(spec["fs_hz"]),
        n_samples=int(spec["n_samples"]),
        t0_s=float(spec.get("t0_s", 0.0)),
        fc_hz=float(spec.get("fc_hz", 5e6)),
        decay_mode=bool(spec.get("decay_mode", False)),
        grid=grid,
    )
    noise = spec.get("noise")
    if noise:
        data = add_noise(data, float(noise["snr"]), noise.get("seed", 0))
    _write(data, args.out)


def cmd_recon(args):
    data = _read_typed(args.channels, ChannelData, "channel data")
    geometry = geometry_from_config(_load_yaml(args.geometry))
    grid = grid_from_config(_load_yaml(args.grid))
    _write(das_reconstruct(data, geometry, grid, args.c), args.out)


def cmd_dualsos(args):
    data = _read_typed(args.channels, ChannelData, "channel data")
    geometry = geometry_from_config(_load_yaml(args.geometry))
    grid = grid_from_config(_load_yaml(args.grid))
    with open(args.ellipse, "r", encoding="utf-8") as f:
        ellipse = ellipse_from_text(f.read())
    _write(das_dual_sos(data, geometry, grid, ellipse, args.c_in, args.c_out), args.out)


def cmd_segment(args):
    image = _read_typed(args.image, Image2D, "an image")
    with open(args.prompts, "r", encoding="utf-8") as f:
        prompts = prompts_from_config(json.load(f))
    request = SegmentRequest(image=image, prompts=prompts, mode=args.mode)
    if args.backend == "builtin":
        params = BuiltinParams(
            smooth_sigma_px=args.sigma,
            threshold_mode=args.threshold_mode,
            percentile=args.percentile,
            grow_tolerance=args.grow_tolerance,
        )
        mask = builtin_segment(request, params)
    else:
        if not args.endpoint:
            raise PatkError("remote backend requires --endpoint")
        result = remote_segment(args.endpoint, request)
        mask = result.mask
        print(f"backend={result.backend} elapsed_ms={result.elapsed_ms:.1f}",
              file=sys.stderr)
    _write(mask, args.out)


def cmd_fit_ellipse(args):
    mask = _read_typed(args.mask, LabelMask, "a mask")
    ellipse = fit_ellipse_from_mask(mask)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(ellipse_to_text(ellipse) + "\n")
    print(args.out)


def cmd_skinband(args):
    if not args.out_band and not (args.image and args.out_image):
        raise PatkError("need --out-band and/or --image with --out-image")
    mask = _read_typed(args.mask, LabelMask, "a mask")
    band = skin_band_mask(mask, mask.grid, depth_mm=args.depth_mm,
                          offset_mm=args.offset_mm)
    if args.out_band:
        _write(band, args.out_band)
    if args.image:
        if not args.out_image:
            raise PatkError("--image requires --out-image")
        image = _read_typed(args.image, Image2D, "an image")
        _write(apply_mask(image, band, args.apply), args.out_image)


def cmd_mip(args):
    slices = [_read_typed(p, Image2D, "an image") for p in args.slices]
    volume = stack_volume(slices, args.step_mm)
    _write(mip(volume, args.axis), args.out)


def cmd_vessels(args):
    labels = _read_typed(args.labels, LabelMask, "a mask")
    if labels.kind != "multilabel":
        labels = connected_components(labels)
    image = _read_typed(args.image, Image2D, "an image")
    criteria = VesselCriteria(area_min_mm2=args.area_min, area_max_mm2=args.area_max,
                              intensity_rel_min=args.intensity_rel_min)
    refined = refine_vessels(labels, image, criteria)
    _write(refined, args.out)
    if args.stats:
        stats = region_stats(refined, image)
        doc = [{"label": s.label, "area_px": s.area_px, "area_mm2": s.area_mm2,
                "mean_intensity": s.mean_intensity, "centroid_px": list(s.centroid_px)}
               for s in stats]
        with open(args.stats, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2)
        print(args.stats)


def cmd_expand_channels(args):
    data = _read_typed(args.channels, ChannelData, "channel data")
    dense_geometry = geometry_from_config(_load_yaml(args.dense_geometry))
    expanded, _ = expand_sparse_channels(data, dense_geometry)
    _write(expanded, args.out)


def cmd_pipeline_run(args):
    report = run_pipeline(load_config(args.config), base_dir=args.base_dir)
    print(json.dumps(report, indent=2))


def cmd_serve(args):
    from .service import serve

    serve(bind_address=args.bind, remote_endpoint=args.remote_endpoint,
          max_workers=args.max_workers)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patk",
        description="Segmentation-guided photoacoustic image processing toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate channel data from a phantom spec")
    p.add_argument("--spec", required=True, help="YAML simulate spec")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("recon", help="single speed-of-sound delay-and-sum")
    p.add_argument("--channels", required=True)
    p.add_argument("--geometry", required=True, help="YAML geometry config")
    p.add_argument("--grid", required=True, help="YAML grid config")
    p.add_argument("--c", type=float, required=True, help="speed of sound, m/s")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recon)

    p = sub.add_parser("dualsos", help="dual speed-of-sound delay-and-sum")
    p.add_argument("--channels", required=True)
    p.add_argument("--geometry", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--ellipse", required=True, help="ellipse JSON document")
    p.add_argument("--c-in", type=float, required=True)
    p.add_argument("--c-out", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dualsos)

    p = sub.add_parser("segment", help="prompt-driven segmentation")
    p.add_argument("--image", required=True)
    p.add_argument("--prompts", required=True, help="JSON list of {x, y, label}")
    p.add_argument("--mode", choices=["binary", "multilabel"], default=BINARY)
    p.add_argument("--backend", choices=["builtin", "remote"], default="builtin")
    p.add_argument("--endpoint", help="remote backend URL")
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--threshold-mode", choices=["otsu", "percentile"], default="otsu")
    p.add_argument("--percentile", type=float, default=95.0)
    p.add_argument("--grow-tolerance", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("fit-ellipse", help="second-moment ellipse fit of a mask")
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True, help="ellipse JSON document")
    p.set_defaults(func=cmd_fit_ellipse)

    p = sub.add_parser("skinband", help="skin-band mask from the upper boundary")
    p.add_argument("--mask", required=True, help="binary body mask")
    p.add_argument("--depth-mm", type=float, default=10.0)
    p.add_argument("--offset-mm", type=float, default=0.0)
    p.add_argument("--apply", choices=["keep", "remove"], default="keep")
    p.add_argument("--image", help="image to mask (optional)")
    p.add_argument("--out-band", help="band mask output")
    p.add_argument("--out-image", help="masked image output (with --image)")
    p.set_defaults(func=cmd_skinband)

    p = sub.add_parser("mip", help="maximum-intensity projection of a slice stack")
    p.add_argument("--slices", nargs="+", required=True)
    p.add_argument("--step-mm", type=float, default=0.1)
    p.add_argument("--axis", choices=["slice-normal", "depth"], default="slice-normal")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mip)

    p = sub.add_parser("vessels", help="area/intensity vessel refinement")
    p.add_argument("--labels", required=True, help="mask (binary or multilabel)")
    p.add_argument("--image", required=True)
    p.add_argument("--area-min", type=float, default=0.05)
    p.add_argument("--area-max", type=float, default=20.0)
    p.add_argument("--intensity-rel-min", type=float, default=0.15)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", help="write region stats JSON here")
    p.set_defaults(func=cmd_vessels)

    p = sub.add_parser("expand-channels", help="duplicate sparse channels onto a dense ring")
    p.add_argument("--channels", required=True)
    p.add_argument("--dense-geometry", required=True, help="YAML geometry with 2n elements")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_expand_channels)

    p = sub.add_parser("pipeline", help="declarative pipeline execution")
    psub = p.add_subparsers(dest="pipeline_command", required=True)
    pr = psub.add_parser("run", help="run a pipeline config")
    pr.add_argument("--config", required=True, help="YAML pipeline config")
    pr.add_argument("--base-dir", default=".")
    pr.set_defaults(func=cmd_pipeline_run)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--bind", default="127.0.0.1:8080")
    p.add_argument("--remote-endpoint", help="wire-protocol backend URL")
    p.add_argument("--max-workers", type=int, default=2)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except PatkError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
