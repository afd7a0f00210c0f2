"""Command-line front end.

Every subcommand writes its outputs plus ``manifest.json`` (parameters, seed
and SHA-256 of every input and output) into ``--out``.  Outputs are staged in
a temporary directory and only moved into place once the command succeeds.
Failures print one line ``stage: message`` on stderr and exit with status 1.

Options may also come from a JSON file given with ``--config``; its keys are
the long option names with dashes or underscores.  Flags on the command line
override the file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .align import AlignmentError, vam_align, write_report
from .core import RawFrameSet, VamctError, make_angles, set_threads, shift_subpixel
from .io import (
    read_frame_stack,
    read_projections,
    read_sinogram,
    read_volume,
    write_frame_stack,
    write_pgm,
    write_projections,
    write_volume,
)
from .metrology import (
    compare_extents,
    density_profile,
    max_extent_projections,
    max_extent_volume,
    registration_offset,
    segment_threshold,
    sinogram_similarity,
    write_profile,
)
from .motion import apply_motion, read_schedule, sample_schedule, write_schedule
from .phantom import builtin_phantom, format_phantom_spec, generate_phantom, load_phantom_spec
from .projector import flat_field_correct, forward_project_volume, simulate_raw, to_attenuation
from .recon import FilterSpec, fbp_volume, reconstruction_mask
from .tracker import track_fixed_points, write_track

__all__ = ["main", "build_parser", "run"]


class CommandError(VamctError):
    def __init__(self, stage, message):
        super().__init__(message)
        self.stage = stage


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Collects outputs for one command in a staging directory."""

    def __init__(self, out, command, params, seed=None):
        self.out = Path(out)
        self.command = command
        self.params = params
        self.seed = seed
        self.inputs = {}
        self.outputs = []
        self.notes = {}
        self._created_out = not self.out.exists()
        self.out.mkdir(parents=True, exist_ok=True)
        self.stage = Path(tempfile.mkdtemp(prefix=".partial-", dir=self.out))

    def input(self, path):
        path = Path(path)
        if not path.is_file():
            raise CommandError("input", f"missing input file {path}")
        self.inputs[path.name] = sha256(path)
        return path

    def path(self, name):
        self.outputs.append(name)
        return self.stage / name

    def pgm(self, name, image):
        """Write a PGM and register its scaling sidecar as an output too."""
        write_pgm(self.path(name), image)
        self.outputs.append(name + ".txt")

    def commit(self):
        manifest = {
            "tool": "vamct",
            "version": __version__,
            "command": self.command,
            "seed": self.seed,
            "parameters": self.params,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {name: sha256(self.stage / name) for name in sorted(self.outputs)},
            "notes": self.notes,
        }
        (self.stage / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        for name in [*self.outputs, "manifest.json"]:
            os.replace(self.stage / name, self.out / name)
        shutil.rmtree(self.stage, ignore_errors=True)
        return manifest

    def abort(self):
        shutil.rmtree(self.stage, ignore_errors=True)
        if self._created_out:
            try:
                self.out.rmdir()
            except OSError:
                pass


def _angles(args):
    return make_angles(args.angle_count, args.angle_step, args.angle_start)


# -- steps: pure functions of (run, args) that write into the staging area --

def step_phantom(run, args):
    if args.spec:
        spec = load_phantom_spec(run.input(args.spec))
    else:
        spec = builtin_phantom(args.builtin, args.nx, args.nz)
    vol = generate_phantom(spec, args.nx, args.ny, args.nz, args.spacing)
    write_volume(run.path("phantom.vamv"), vol)
    run.path("phantom.txt").write_text(format_phantom_spec(spec), encoding="utf-8")


def step_project(run, args):
    vol = read_volume(run.input(args.volume))
    if vol.nx != vol.ny:
        raise CommandError("project", f"volume slices must be square, got {vol.ny}x{vol.nx}")
    pset = forward_project_volume(vol, _angles(args))
    write_projections(run.path("projections.vamp"), pset)
    if args.raw:
        seed = None if args.noise_free else args.seed
        raw = simulate_raw(pset, args.flat_level, args.dark_level, noise_seed=seed)
        write_projections(run.path("raw.vamp"), raw.projections)
        write_frame_stack(run.path("flats.vamp"), raw.flats)
        write_frame_stack(run.path("darks.vamp"), raw.darks)


def step_flatfield(run, args):
    proj = read_projections(run.input(args.raw))
    flats = read_frame_stack(run.input(args.flats))
    darks = read_frame_stack(run.input(args.darks))
    corrected = flat_field_correct(RawFrameSet(proj, flats, darks))
    run.notes["denominator_clamped"] = corrected.clamped
    pset = corrected.projections
    if not args.no_attenuation:
        att = to_attenuation(pset)
        run.notes["attenuation_clamped"] = att.clamped
        pset = att.projections
    write_projections(run.path("projections.vamp"), pset)


def step_perturb(run, args):
    pset = read_projections(run.input(args.projections))
    if args.schedule:
        schedule = read_schedule(run.input(args.schedule))
    else:
        if args.mode == "world":
            ranges = [args.range_x, args.range_y, args.range_z]
        else:
            ranges = [args.range_x, args.range_z]
        schedule = sample_schedule(args.seed, pset.angles, ranges, args.mode)
    write_projections(run.path("perturbed.vamp"), apply_motion(pset, schedule))
    write_schedule(run.path("schedule.csv"), schedule)


def step_track(run, args):
    pset = read_projections(run.input(args.projections))
    track = track_fixed_points(pset, args.method, args.tau_bg, args.window)
    write_track(run.path("track.csv"), track)
    run.notes["valid_frames"] = track.n_valid


def step_align(run, args, prefix=""):
    pset = read_projections(run.input(args.projections))
    aligned, report = vam_align(pset, args.method, args.mode, args.tau_bg, args.window, args.target_row)
    write_projections(run.path(f"{prefix}aligned.vamp"), aligned)
    write_report(run.path(f"{prefix}alignment.csv"), run.path(f"{prefix}alignment.txt"), report)
    return aligned, report


def step_reconstruct(run, args):
    pset = read_projections(run.input(args.projections), spacing=args.spacing)
    vol = fbp_volume(pset, FilterSpec(args.filter, args.cutoff))
    write_volume(run.path("recon.vamv"), vol)


def step_measure(run, args):
    vol = read_volume(run.input(args.volume))
    pset = read_projections(run.input(args.projections), spacing=vol.spacing)
    mask = segment_threshold(vol, args.tau_volume, args.open_radius, args.close_radius)
    report = compare_extents(max_extent_volume(mask, vol.spacing),
                             max_extent_projections(pset, args.tau_projection), args.tolerance)
    run.path("measurement.txt").write_text(report.text(), encoding="utf-8")
    with open(run.path("measurement.csv"), "w", encoding="utf-8") as fh:
        fh.write("key,value\n")
        for line in report.lines():
            key, value = line.split(" ", 1)
            fh.write(f"{key},{value}\n")
    if args.profile_column is not None:
        rows, values = density_profile(pset.images[args.profile_index], args.profile_column)
        write_profile(run.path("profile.csv"), rows, values)


def _load_any(path):
    head = Path(path).read_bytes()[:4]
    if head == b"VAMV":
        return read_volume(path).data
    if head == b"VAMS":
        return read_sinogram(path).data
    if head == b"VAMP":
        return read_projections(path).images
    raise CommandError("compare", f"unrecognised file {path}")


def compare_arrays(a, b, register=False):
    """Similarity of ``a`` against reference ``b``, optionally after translation."""
    from scipy import ndimage

    offset = None
    if register:
        offset = registration_offset(a, b)
        a = ndimage.shift(a, offset[::-1], order=1, mode="constant")
    if a.ndim >= 2 and a.shape[-1] == a.shape[-2]:
        mask = np.broadcast_to(reconstruction_mask(a.shape[-1]), a.shape)
        sim = sinogram_similarity(a[mask], b[mask])
    else:
        sim = sinogram_similarity(a, b)
    return sim, offset


def step_compare(run, args):
    a = _load_any(run.input(args.a))
    b = _load_any(run.input(args.b))
    sim, offset = compare_arrays(a, b, args.register)
    lines = [f"nrmse {sim.nrmse!r}", f"pearson {'undefined' if sim.pearson is None else repr(sim.pearson)}"]
    if offset is not None:
        lines.append("offset " + " ".join(repr(o) for o in offset))
    lines.append(f"tolerance {args.tolerance!r}")
    lines.append(f"result {'pass' if sim.nrmse <= args.tolerance else 'fail'}")
    run.path("comparison.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return sim


def step_demo_fig5(run, args):
    """Motion-recovery scenario: phantom, motion, both alignments, reconstructions."""
    n, nz = args.n, args.nz
    angles = _angles(args)
    spec = builtin_phantom(args.builtin, n, nz)
    write_volume(run.path("phantom.vamv"), generate_phantom(spec, n, n, nz, args.spacing))
    vol = read_volume(run.stage / "phantom.vamv")
    write_projections(run.path("projections.vamp"), forward_project_volume(vol, angles))
    truth_set = read_projections(run.stage / "projections.vamp", spacing=vol.spacing)
    m = args.motion
    schedule = sample_schedule(args.seed, angles, [(-m, m)] * 3, "world")
    write_schedule(run.path("schedule.csv"), schedule)
    write_projections(run.path("perturbed.vamp"), apply_motion(truth_set, schedule))
    perturbed = read_projections(run.stage / "perturbed.vamp", spacing=vol.spacing)

    spec_f = FilterSpec(args.filter, args.cutoff)
    write_volume(run.path("recon_truth.vamv"), fbp_volume(truth_set, spec_f))
    write_volume(run.path("recon_perturbed.vamv"), fbp_volume(perturbed, spec_f))
    sets = {}
    reports = {}
    for mode, tag in (("ideal", "ideal"), ("virtual_cor", "vcor")):
        aligned, report = vam_align(perturbed, args.method, mode, args.tau_bg, args.window)
        write_projections(run.path(f"aligned_{tag}.vamp"), aligned)
        write_report(run.path(f"alignment_{tag}.csv"), run.path(f"alignment_{tag}.txt"), report)
        sets[tag] = read_projections(run.stage / f"aligned_{tag}.vamp", spacing=vol.spacing)
        reports[tag] = report
        write_volume(run.path(f"recon_{tag}.vamv"), fbp_volume(sets[tag], spec_f))

    row = int(round(reports["vcor"].target_row)) if args.row is None else args.row
    # common layer set: the vertical stage on its own
    common = np.empty_like(perturbed.images)
    for i, dv in enumerate(reports["vcor"].dv):
        common[i] = shift_subpixel(perturbed.images[i], 0.0, dv)
    run.pgm("fig5a_misaligned_sinogram.pgm", perturbed.images[:, row, :])
    run.pgm("fig5b_common_layer_sinogram.pgm", common[:, row, :])
    run.pgm("fig5c_ideal_sinogram.pgm", sets["ideal"].images[:, row, :])
    run.pgm("fig5d_virtual_cor_sinogram.pgm", sets["vcor"].images[:, row, :])
    truth = read_volume(run.stage / "recon_truth.vamv").data
    recs = {tag: read_volume(run.stage / f"recon_{tag}.vamv").data for tag in ("ideal", "vcor")}
    run.pgm("fig5e_ideal_reconstruction.pgm", recs["ideal"][row])
    run.pgm("fig5f_virtual_cor_reconstruction.pgm", recs["vcor"][row])

    lines = []
    unaligned, _ = compare_arrays(read_volume(run.stage / "recon_perturbed.vamv").data, truth, register=True)
    lines.append(f"unaligned_nrmse {unaligned.nrmse!r}")
    for tag in ("ideal", "vcor"):
        sim, off = compare_arrays(recs[tag], truth, register=True)
        lines.append(f"{tag}_nrmse {sim.nrmse!r}")
        lines.append(f"{tag}_offset_xyz " + " ".join(repr(o) for o in off))
        lines.append(f"{tag}_result {'pass' if sim.nrmse <= args.tolerance else 'fail'}")
    lines.append(f"tolerance {args.tolerance!r}")
    run.path("comparison.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


STEPS = {
    "phantom": step_phantom,
    "project": step_project,
    "flatfield": step_flatfield,
    "perturb": step_perturb,
    "track": step_track,
    "align": step_align,
    "reconstruct": step_reconstruct,
    "measure": step_measure,
    "compare": step_compare,
    "demo-fig5": step_demo_fig5,
}

# options that describe where things go rather than what is computed
_NOT_RECORDED = {"command", "config", "out", "threads"}
# input files are identified by name here and by content hash under "inputs",
# so a manifest does not depend on where the run happened
_PATH_OPTIONS = {"spec", "volume", "projections", "raw", "flats", "darks", "schedule", "a", "b"}


def _angle_options(p):
    p.add_argument("--angle-start", type=float, default=0.0)
    p.add_argument("--angle-step", type=float, default=0.5)
    p.add_argument("--angle-count", type=int, default=360)


def _track_options(p):
    p.add_argument("--method", choices=("apex", "centroid", "marker"), default="centroid")
    p.add_argument("--tau-bg", type=float, default=None, help="background threshold (default 5%% of frame max)")
    p.add_argument("--window", type=int, default=9, help="marker refinement window")


def _filter_options(p):
    p.add_argument("--filter", choices=("ram-lak", "shepp-logan", "hann"), default="ram-lak")
    p.add_argument("--cutoff", type=float, default=1.0)


def build_parser():
    """Return ``(parser, {name: subparser})``."""
    parser = argparse.ArgumentParser(prog="vamct", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        subparsers[name] = p
        p.add_argument("--config", help="JSON file of option defaults")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=0, help="0 = $VAMCT_THREADS or all cores")
        p.add_argument("--out", required=True, help="output directory")
        return p

    p = add("phantom", "rasterise a phantom spec to a VAMV volume")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--spec", help="phantom spec file")
    g.add_argument("--builtin", default="tooth", help="tooth | tooth-marker | shepp-logan | disk | empty")
    p.add_argument("--nx", type=int, default=256)
    p.add_argument("--ny", type=int, default=256)
    p.add_argument("--nz", type=int, default=128)
    p.add_argument("--spacing", type=float, default=12.2, help="micrometres per voxel")

    p = add("project", "forward-project a volume to a VAMP projection set")
    p.add_argument("--volume", required=True)
    _angle_options(p)
    p.add_argument("--raw", action="store_true", help="also write raw counts with flats and darks")
    p.add_argument("--flat-level", type=float, default=1000.0)
    p.add_argument("--dark-level", type=float, default=100.0)
    p.add_argument("--noise-free", action="store_true", help="skip the seeded Poisson noise on raw frames")

    p = add("flatfield", "normalise raw frames and convert to attenuation")
    p.add_argument("--raw", required=True)
    p.add_argument("--flats", required=True)
    p.add_argument("--darks", required=True)
    p.add_argument("--no-attenuation", action="store_true", help="stop after normalisation")

    p = add("perturb", "apply per-projection translation errors")
    p.add_argument("--projections", required=True)
    p.add_argument("--schedule", help="existing schedule CSV instead of sampling")
    p.add_argument("--mode", choices=("world", "detector"), default="world",
                   help="detector mode draws du from --range-x and dv from --range-z")
    for axis in ("x", "y", "z"):
        p.add_argument(f"--range-{axis}", type=float, nargs=2, default=(-15.0, 15.0), metavar=("LO", "HI"))

    p = add("track", "track the fixed point through a projection set")
    p.add_argument("--projections", required=True)
    _track_options(p)

    p = add("align", "virtual alignment of a projection set")
    p.add_argument("--projections", required=True)
    _track_options(p)
    p.add_argument("--mode", choices=("ideal", "virtual_cor"), default="virtual_cor")
    p.add_argument("--target-row", type=float, default=None)

    p = add("reconstruct", "filtered back-projection of a projection set")
    p.add_argument("--projections", required=True)
    p.add_argument("--spacing", type=float, default=12.2)
    _filter_options(p)

    p = add("measure", "maximum-extent comparison between a volume and projections")
    p.add_argument("--volume", required=True)
    p.add_argument("--projections", required=True)
    p.add_argument("--tau-volume", type=float, default=1.0)
    p.add_argument("--tau-projection", type=float, default=1.0)
    p.add_argument("--open-radius", type=int, default=1)
    p.add_argument("--close-radius", type=int, default=1)
    p.add_argument("--tolerance", type=float, default=1.0)
    p.add_argument("--profile-index", type=int, default=0, help="projection index for --profile-column")
    p.add_argument("--profile-column", type=int, default=None)

    p = add("compare", "similarity of two volumes, sinograms or projection sets")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True, help="reference")
    p.add_argument("--register", action="store_true", help="translate a onto b first")
    p.add_argument("--tolerance", type=float, default=0.03)

    p = add("demo-fig5", "misalign, realign (both modes) and reconstruct a phantom")
    p.add_argument("--builtin", default="tooth")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--nz", type=int, default=128)
    p.add_argument("--spacing", type=float, default=12.2)
    _angle_options(p)
    p.add_argument("--motion", type=float, default=15.0, help="uniform +/- range per axis, px")
    _track_options(p)
    _filter_options(p)
    p.add_argument("--row", type=int, default=None, help="axial level for the figures")
    p.add_argument("--tolerance", type=float, default=0.03)
    return parser, subparsers


def _apply_config(parser, subparsers, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    command = next((a for a in rest if not a.startswith("-")), None)
    if not known.config or command not in subparsers:
        return parser.parse_args(argv)
    try:
        cfg = json.loads(Path(known.config).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise CommandError("config", f"cannot read {known.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise CommandError("config", "config file must hold a JSON object")
    sub = subparsers[command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in actions or dest in ("config", "help"):
            raise CommandError("config", f"unknown option {key!r} for {command}")
        if isinstance(value, list):
            value = tuple(value)
        defaults[dest] = value
        actions[dest].required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def run(argv=None):
    """Run one command; returns the manifest dict."""
    parser, subparsers = build_parser()
    args = _apply_config(parser, subparsers, argv)
    set_threads(args.threads)
    params = {}
    for k, v in sorted(vars(args).items()):
        if k in _NOT_RECORDED:
            continue
        if k in _PATH_OPTIONS and isinstance(v, str):
            v = Path(v).name
        params[k] = list(v) if isinstance(v, tuple) else v
    r = Run(args.out, args.command, params, args.seed)
    try:
        STEPS[args.command](r, args)
        return r.commit()
    except BaseException:
        r.abort()
        raise


def main(argv=None):
    try:
        run(argv)
    except CommandError as exc:
        print(f"{exc.stage}: {exc}", file=sys.stderr)
        return 1
    except AlignmentError as exc:
        print(f"align.{exc}", file=sys.stderr)
        return 1
    except (VamctError, OSError) as exc:
        cmd = next((a for a in (argv or sys.argv[1:]) if not a.startswith("-")), "vamct")
        print(f"{cmd}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
