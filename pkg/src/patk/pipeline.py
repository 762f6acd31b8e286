"""Declarative end-to-end pipeline: a versioned config document drives
simulate/load, reconstruction, segmentation, and custom processing, with
artifacts written atomically (staging directory, then rename) so declared
output paths never hold partial results.
"""

from __future__ import annotations

import json
import os
import shutil
import time
from pathlib import Path

import numpy as np
import yaml

from .core import (
    BINARY,
    MULTILABEL,
    ChannelData,
    Ellipse,
    Image2D,
    ImageGrid,
    LabelMask,
    PromptPoint,
)
from .containers import read_container, write_container
from .dualsos import das_dual_sos, ellipse_to_text, fit_ellipse_from_mask
from .errors import ConfigError, PipelineStageError
from .forward import (
    add_noise,
    medium_from_config,
    phantom_from_config,
    ring_array,
    simulate,
)
from .maskops import (
    VesselCriteria,
    apply_mask,
    connected_components,
    refine_vessels,
    skin_band_mask,
)
from .recon import das_reconstruct
from .segment import BuiltinParams, SegmentRequest, builtin_segment, remote_segment

CONFIG_VERSION = 1

SINGLE = "single"
DUAL = "dual"
FIT_FROM_MASK = "fit-from-mask"
EXPLICIT = "explicit"


def geometry_from_config(doc: dict):
    """Array geometry from config: ring {n_elements, radius_mm, center} or
    explicit {elements: [[x, y], ...]}."""
    kind = doc.get("type", "ring")
    if kind == "ring":
        center = doc.get("center", (0.0, 0.0))
        return ring_array(int(doc["n_elements"]), float(doc["radius_mm"]),
                          center=(float(center[0]), float(center[1])),
                          descriptor=doc.get("descriptor", ""))
    if kind == "explicit":
        from .core import ArrayGeometry

        return ArrayGeometry(elements=np.asarray(doc["elements"], dtype=np.float64),
                             descriptor=doc.get("descriptor", ""))
    raise ConfigError(f"unknown geometry type {kind!r}")


def grid_from_config(doc: dict) -> ImageGrid:
    try:
        return ImageGrid(
            origin_x_mm=float(doc["origin_x_mm"]),
            origin_y_mm=float(doc["origin_y_mm"]),
            pitch_mm=float(doc["pitch_mm"]),
            width_px=int(doc["width_px"]),
            height_px=int(doc["height_px"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad grid config: {e}") from e


def ellipse_from_config(doc: dict) -> Ellipse:
    try:
        return Ellipse(cx_mm=float(doc["cx"]), cy_mm=float(doc["cy"]),
                       a_mm=float(doc["a"]), b_mm=float(doc["b"]),
                       theta_rad=float(doc.get("theta", 0.0)))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad ellipse config: {e}") from e


def prompts_from_config(items) -> tuple:
    try:
        return tuple(PromptPoint(x_px=int(p["x"]), y_px=int(p["y"]),
                                 label=int(p["label"])) for p in items)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad prompts config: {e}") from e


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        doc = yaml.safe_load(f)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return doc


def validate_config(doc: dict) -> dict:
    """Structural validation; returns the document unchanged on success."""
    if doc.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config version must be {CONFIG_VERSION}, got {doc.get('version')}")
    inp = doc.get("input")
    if not isinstance(inp, dict) or ("simulate" in inp) == ("container" in inp):
        raise ConfigError("input must name exactly one of simulate | container")
    if "grid" not in doc:
        raise ConfigError("config requires a grid")
    recon = doc.get("reconstruction")
    if not isinstance(recon, dict) or recon.get("mode") not in (SINGLE, DUAL):
        raise ConfigError("reconstruction.mode must be single or dual")
    if recon["mode"] == SINGLE:
        if "c" not in recon:
            raise ConfigError("single reconstruction requires c")
    else:
        if "c_in" not in recon or "c_out" not in recon:
            raise ConfigError("dual reconstruction requires c_in and c_out")
        source = recon.get("ellipse_source", FIT_FROM_MASK)
        if source not in (FIT_FROM_MASK, EXPLICIT):
            raise ConfigError(f"ellipse_source must be {FIT_FROM_MASK} or {EXPLICIT}")
        if source == FIT_FROM_MASK and "segmentation" not in doc:
            raise ConfigError("dual fit-from-mask requires a segmentation stage")
        if source == EXPLICIT and "ellipse" not in recon:
            raise ConfigError("explicit ellipse_source requires reconstruction.ellipse")
    seg = doc.get("segmentation")
    if seg is not None:
        backend = seg.get("backend", "builtin")
        if backend not in ("builtin", "remote"):
            raise ConfigError("segmentation.backend must be builtin or remote")
        if backend == "remote" and "endpoint" not in seg:
            raise ConfigError("remote segmentation requires an endpoint")
        if not seg.get("prompts"):
            raise ConfigError("segmentation requires prompts")
    post = doc.get("postprocess")
    if post is not None:
        mode = post.get("mode", "none")
        if mode not in ("skin-band", "vessels", "none"):
            raise ConfigError("postprocess.mode must be skin-band, vessels, or none")
        if mode in ("skin-band", "vessels") and seg is None:
            raise ConfigError(f"postprocess {mode} requires a segmentation stage")
    if "geometry" not in doc and "simulate" not in inp:
        raise ConfigError("container input requires a geometry")
    return doc


class _Run:
    """Collects stage records and artifacts for one pipeline execution."""

    def __init__(self):
        self.stages = []
        self.objects = {}

    def stage(self, name: str, params: dict, fn):
        t0 = time.perf_counter()
        try:
            produced = fn()
        except Exception as e:
            raise PipelineStageError(name, e) from e
        record = {
            "name": name,
            "wall_time_s": time.perf_counter() - t0,
            "params": params,
            "artifacts": sorted(k for k in produced if not k.startswith("_")),
        }
        self.stages.append(record)
        self.objects.update(produced)


def _write_artifact(key: str, obj, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(obj, (ChannelData, Image2D, LabelMask)):
        write_container(obj, path)
    elif isinstance(obj, Ellipse):
        path.write_text(ellipse_to_text(obj) + "\n", encoding="utf-8")
    else:
        raise TypeError(f"cannot write artifact {key} of type {type(obj).__name__}")


def run_pipeline(config: dict, base_dir=".") -> dict:
    """Execute a validated config; returns the run report.

    Declared outputs are materialized only after every stage succeeds;
    a failed run leaves partial artifacts in a quarantine directory and
    raises PipelineStageError naming the failed stage.
    """
    validate_config(config)
    base = Path(base_dir)
    run = _Run()
    grid = grid_from_config(config["grid"])

    inp = config["input"]
    if "simulate" in inp:
        sim = inp["simulate"]

        def do_simulate():
            phantom = phantom_from_config(sim["phantom"])
            medium = medium_from_config(sim["medium"])
            geometry = geometry_from_config(sim["geometry"])
            data = simulate(
                phantom, geometry, medium,
                fs_hz=float(sim["fs_hz"]), n_samples=int(sim["n_samples"]),
                t0_s=float(sim.get("t0_s", 0.0)),
                fc_hz=float(sim.get("fc_hz", 5e6)),
                decay_mode=bool(sim.get("decay_mode", False)),
                grid=grid,
            )
            noise = sim.get("noise")
            if noise:
                # Seed defaults keep re-runs bit-identical.
                seed = noise.get("seed", config.get("seed", 0))
                data = add_noise(data, float(noise["snr"]), seed)
            return {"channels": data, "_geometry": geometry}

        run.stage("simulate", sim, do_simulate)
    else:
        path = base / inp["container"]

        def do_load():
            if not path.exists():
                raise FileNotFoundError(f"input container not found: {path}")
            data = read_container(path)
            if not isinstance(data, ChannelData):
                raise ConfigError(f"{path} does not hold channel data")
            return {"channels": data}

        run.stage("load", {"container": str(path)}, do_load)

    if "geometry" in config:
        geometry = geometry_from_config(config["geometry"])
    else:
        geometry = run.objects["_geometry"]

    recon_cfg = config["reconstruction"]
    if recon_cfg["mode"] == SINGLE:
        c_single = float(recon_cfg["c"])
    else:
        # Dual mode reconstructs a coupling-medium prepass for segmentation.
        c_single = float(recon_cfg["c_out"])

    def do_recon():
        img = das_reconstruct(run.objects["channels"], geometry, grid, c_single)
        return {"image": img}

    run.stage("recon", {"mode": SINGLE, "c": c_single}, do_recon)

    seg_cfg = config.get("segmentation")
    if seg_cfg is not None:
        def do_segment():
            prompts = prompts_from_config(seg_cfg["prompts"])
            request = SegmentRequest(image=run.objects["image"], prompts=prompts,
                                     mode=seg_cfg.get("mode", BINARY))
            if seg_cfg.get("backend", "builtin") == "builtin":
                params = BuiltinParams(**seg_cfg.get("params", {}))
                mask = builtin_segment(request, params)
            else:
                mask = remote_segment(seg_cfg["endpoint"], request).mask
            return {"mask": mask}

        run.stage("segment", {k: v for k, v in seg_cfg.items() if k != "prompts"}
                  | {"n_prompts": len(seg_cfg["prompts"])}, do_segment)

    if recon_cfg["mode"] == DUAL:
        if recon_cfg.get("ellipse_source", FIT_FROM_MASK) == FIT_FROM_MASK:
            def do_fit():
                mask = run.objects["mask"]
                if mask.kind != BINARY:
                    mask = LabelMask(grid=mask.grid,
                                     labels=mask.foreground().astype(np.int32),
                                     kind=BINARY)
                return {"ellipse": fit_ellipse_from_mask(mask)}

            run.stage("fit-ellipse", {}, do_fit)
        else:
            run.stage("fit-ellipse",
                      {"source": EXPLICIT},
                      lambda: {"ellipse": ellipse_from_config(recon_cfg["ellipse"])})

        def do_dual():
            img = das_dual_sos(run.objects["channels"], geometry, grid,
                               run.objects["ellipse"],
                               float(recon_cfg["c_in"]), float(recon_cfg["c_out"]))
            return {"dual_image": img}

        run.stage("dualsos",
                  {"c_in": recon_cfg["c_in"], "c_out": recon_cfg["c_out"]}, do_dual)

    post_cfg = config.get("postprocess")
    if post_cfg is not None and post_cfg.get("mode", "none") != "none":
        final_image = run.objects.get("dual_image", run.objects.get("image"))
        if post_cfg["mode"] == "skin-band":
            def do_band():
                band = skin_band_mask(run.objects["mask"], grid,
                                      depth_mm=float(post_cfg.get("depth_mm", 10.0)),
                                      offset_mm=float(post_cfg.get("offset_mm", 0.0)))
                out = apply_mask(final_image, band, post_cfg.get("apply", "keep"))
                return {"band_mask": band, "postprocessed": out}

            run.stage("skin-band", post_cfg, do_band)
        else:
            def do_vessels():
                mask = run.objects["mask"]
                if mask.kind != MULTILABEL:
                    mask = connected_components(mask)
                criteria = VesselCriteria(**post_cfg.get("criteria", {}))
                refined = refine_vessels(mask, final_image, criteria)
                return {"labels": refined, "postprocessed": apply_mask(
                    final_image,
                    LabelMask(grid=grid, labels=(refined.labels > 0).astype(np.int32),
                              kind=BINARY),
                    "keep")}

            run.stage("vessels", post_cfg, do_vessels)

    return _materialize(config, run, base)


def _materialize(config: dict, run: _Run, base: Path) -> dict:
    outputs = dict(config.get("outputs", {}))
    out_dir = base / outputs.pop("dir", ".")
    report_rel = outputs.pop("report", None)
    produced = {k: v for k, v in run.objects.items() if not k.startswith("_")}
    unknown = set(outputs) - set(produced)
    if unknown:
        raise ConfigError(f"outputs reference artifacts never produced: {sorted(unknown)}")

    # Stage everything first so declared paths never see partial files.
    staging = out_dir / f".staging-{os.getpid()}-{int(time.time() * 1e6)}"
    written = {}
    try:
        for key, rel in outputs.items():
            staged = staging / rel
            _write_artifact(key, produced[key], staged)
            written[key] = (staged, out_dir / rel)
    except Exception as e:
        quarantine = out_dir / "quarantine"
        if staging.exists():
            quarantine.mkdir(parents=True, exist_ok=True)
            shutil.move(str(staging), str(quarantine / staging.name))
        raise PipelineStageError("write-outputs", e) from e
    artifact_paths = {}
    for key, (staged, final) in written.items():
        final.parent.mkdir(parents=True, exist_ok=True)
        os.replace(staged, final)
        artifact_paths[key] = str(final)
    if staging.exists():
        shutil.rmtree(staging, ignore_errors=True)

    report = {
        "version": CONFIG_VERSION,
        "status": "ok",
        "stages": run.stages,
        "artifacts": artifact_paths,
    }
    if report_rel is not None:
        report_path = out_dir / report_rel
        report_path.parent.mkdir(parents=True, exist_ok=True)
        report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        report["artifacts"]["report"] = str(report_path)
    return report
