"""Command-line front end.

Exit codes: 0 success, 2 invalid parameters/usage, 3 I/O failure,
4 numeric degeneracy. Every command is deterministic given its flags; the
seed in use is printed. A plain-text ``key=value`` config file can supply
any option of a command; explicit flags win, unknown keys are a hard error.
"""

from __future__ import annotations

import functools
import math
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import fieldio
from .errors import DegenerateNormalizationError, GhminvError, ParseError
from .features import feature_vector, features_to_csv
from .field import (
    MultiChannelField,
    add_gaussian_noise,
    add_salt_pepper,
    apply_special_tr,
)
from .generator import generate_invariant_set
from .harness import (
    mre,
    nn_classify,
    rank_matches,
    sliding_window_scan,
    synth_texture,
    synth_vortex_field,
)
from .moments import compute_moments, hermite_norm_squared, moments_to_csv, orthogonality_check, sigma_guidance
from .polynomials import load_invariant_set, save_invariant_set


def _cap_threads(threads: int | None):
    threads = threads or os.environ.get("MGHMI_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)


def _load_config(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    config = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        click.echo(f"error: cannot read config: {exc}", err=True)
        sys.exit(3)
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            click.echo(f"error: config line {lineno} is not key=value", err=True)
            sys.exit(2)
        key, value = line.split("=", 1)
        config[key.strip()] = value.strip()
    return config


def _merge_config(ctx: click.Context, config: dict[str, str]):
    """Fill parameters from the config file; explicit flags take precedence."""
    params = {p.name: p for p in ctx.command.params}
    for key, value in config.items():
        name = key.replace("-", "_")
        if name not in params or name in ("config",):
            click.echo(f"error: unknown config key {key!r}", err=True)
            sys.exit(2)
        if ctx.get_parameter_source(name) == click.core.ParameterSource.DEFAULT:
            ctx.params[name] = params[name].type.convert(value, params[name], ctx)


def _run(body):
    """Map library errors to the exit-code contract."""

    @functools.wraps(body)
    def wrapper(*args, **kwargs):
        try:
            return body(*args, **kwargs)
        except DegenerateNormalizationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(4)
        except ParseError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except (OSError, FileNotFoundError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except GhminvError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


@click.group()
@click.option("--threads", type=int, default=None, help="Cap worker threads (env: MGHMI_THREADS).")
def main(threads):
    """Moment-invariant generation, feature extraction and experiments."""
    _cap_threads(threads)


_common = [
    click.option("--config", type=click.Path(), default=None, help="key=value config file."),
]


def _with_config(cmd):
    for deco in _common:
        cmd = deco(cmd)
    return cmd


@main.command()
@click.option("-m", "--coord-dim", type=int, default=2, show_default=True)
@click.option("-n", "--channel-dim", type=int, default=2, show_default=True)
@click.option("--model", type=click.Choice(["TR", "RA"]), default="TR", show_default=True)
@click.option("-k", "--degree", type=int, default=2, show_default=True)
@click.option("-o", "--order", type=int, default=3, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--trials", type=int, default=50, show_default=True)
@click.option("--tolerance", type=float, default=1e-8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_with_config
@click.pass_context
@_run
def gen(ctx, coord_dim, channel_dim, model, degree, order, out, trials, tolerance, seed, config):
    """Generate and prune an invariant set, write it to a set file."""
    _merge_config(ctx, _load_config(config))
    p = ctx.params
    invset, stats = generate_invariant_set(
        p["coord_dim"], p["channel_dim"], p["model"], p["degree"], p["order"],
        trials=p["trials"], tolerance=p["tolerance"], rng_seed=p["seed"],
    )
    save_invariant_set(invset, p["out"])
    click.echo(f"seed: {p['seed']}")
    click.echo(f"candidates (nonzero, deduplicated): {stats['candidates']}")
    click.echo(f"independent: {stats['independent']}")
    if not len(invset):
        click.echo("warning: empty invariant set for these parameters", err=True)


@main.command("ortho-check")
@click.option("--max-order", type=int, default=6, show_default=True)
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--halfwidth", type=float, default=12.0, show_default=True)
@click.option("--step", type=float, default=1e-3, show_default=True)
@_run
def ortho_check(max_order, sigma, halfwidth, step):
    """Verify weighted Hermite orthogonality numerically."""
    worst = 0.0
    for p1 in range(max_order + 1):
        for p2 in range(max_order + 1):
            got = orthogonality_check(p1, p2, sigma, halfwidth, step)
            want = hermite_norm_squared(p1) if p1 == p2 else 0.0
            worst = max(worst, abs(got - want))
    click.echo(f"max abs error up to order {max_order}: {worst:.3e}")
    if worst >= 1e-6:
        click.echo("FAIL: error above 1e-6", err=True)
        sys.exit(4)
    click.echo("PASS")


@main.command()
@click.option("--field", "field_path", type=click.Path(), required=True)
@click.option("--max-order", type=int, default=3, show_default=True)
@click.option("--sigma", type=float, required=True)
@click.option("--out", type=click.Path(), required=True)
@_run
def moments(field_path, max_order, sigma, out):
    """Compute the moment tensor of a field, write it as CSV."""
    fld = fieldio.load_field(field_path)
    hint = sigma_guidance(fld.extent, sigma)
    if hint:
        click.echo(f"warning: {hint}", err=True)
    moments_to_csv(compute_moments(fld, max_order, sigma), out)


@main.command()
@click.option("--field", "field_path", type=click.Path(), required=True)
@click.option("--set", "set_path", type=click.Path(), required=True)
@click.option("--sigma", type=float, required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--mask/--no-mask", default=False, show_default=True,
              help="Apply the inscribed-circle protocol before moments.")
@_run
def features(field_path, set_path, sigma, out, mask):
    """Evaluate an invariant set on one field, write a feature CSV row."""
    fld = fieldio.load_field(field_path)
    invset = load_invariant_set(set_path)
    hint = sigma_guidance(fld.extent, sigma)
    if hint:
        click.echo(f"warning: {hint}", err=True)
    feat = feature_vector(fld, invset, sigma, mask=mask)
    features_to_csv([(Path(field_path).stem, feat)], out)
    click.echo(f"wrote {len(feat)} feature values")


def _label_of(path: Path) -> str:
    stem = path.stem
    return stem.split("__", 1)[0]


def _apply_noise(fld: MultiChannelField, spec: str, seed: int, clamp: bool) -> MultiChannelField:
    if spec == "none":
        return fld
    kind, _, value = spec.partition(":")
    if kind == "gaussian":
        return add_gaussian_noise(fld, float(value), rng_seed=seed, clamp=clamp)
    if kind in ("sp", "salt-pepper"):
        return add_salt_pepper(fld, float(value), rng_seed=seed)
    raise ParseError(f"bad noise spec {spec!r}")


@main.command()
@click.option("--train-dir", type=click.Path(), required=True)
@click.option("--test-dir", type=click.Path(), required=True)
@click.option("--set", "set_path", type=click.Path(), required=True)
@click.option("--sigma", type=float, required=True)
@click.option("--noise", default="none", show_default=True,
              help="none | gaussian:SIGMA | sp:DENSITY (applied to test fields).")
@click.option("--mask/--no-mask", default=False, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_run
def classify(train_dir, test_dir, set_path, sigma, noise, mask, seed):
    """Chi-square nearest-neighbor classification of a directory of fields."""
    invset = load_invariant_set(set_path)
    clamp = invset.channel_dim == 3  # image-valued fields live in [0,1]
    train_paths = sorted(Path(train_dir).iterdir())
    test_paths = sorted(Path(test_dir).iterdir())
    if not train_paths:
        raise GhminvError("no training files")
    train = [
        (_label_of(p), feature_vector(fieldio.load_field(p), invset, sigma, mask=mask))
        for p in train_paths
    ]
    feats, truth = [], []
    for i, p in enumerate(test_paths):
        fld = _apply_noise(fieldio.load_field(p), noise, seed + i, clamp)
        feats.append(feature_vector(fld, invset, sigma, mask=mask))
        truth.append(_label_of(p))
    click.echo(f"seed: {seed}")
    labels, accuracy = nn_classify(train, feats, truth)
    for p, label in zip(test_paths, labels):
        click.echo(f"{p.name},{label}")
    click.echo(f"accuracy: {100.0 * accuracy:.2f}")


@main.command()
@click.option("--frame", type=click.Path(), required=True)
@click.option("--template", type=click.Path(), required=True)
@click.option("--set", "set_path", type=click.Path(), required=True)
@click.option("--sigma", type=float, required=True)
@click.option("--window", type=int, required=True)
@click.option("-k", "--top-k", type=int, required=True)
@click.option("--stride", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Detection CSV path.")
@click.option("--heatmap", type=click.Path(), default=None, help="8-bit distance raster.")
@_run
def detect(frame, template, set_path, sigma, window, top_k, stride, out, heatmap):
    """Rank frame positions by feature distance to a template patch."""
    invset = load_invariant_set(set_path)
    frame_field = fieldio.load_field(frame)
    template_field = fieldio.load_field(template)
    if any(e < window for e in template_field.extent):
        raise GhminvError("template smaller than the scan window")
    # feature of the template's central window
    cy, cx = (template_field.extent[0] - 1) // 2, (template_field.extent[1] - 1) // 2
    half = window // 2
    patch = MultiChannelField(
        template_field.data[cy - half : cy + half + 1, cx - half : cx + half + 1],
        template_field.spacing,
    )
    tfeat = feature_vector(patch, invset, sigma)
    raster = sliding_window_scan(frame_field, invset, window, sigma, stride=stride)
    result = rank_matches(raster, tfeat, top_k)
    lines = [
        f"{rank},{row},{col},{dist:.17g}"
        for rank, ((row, col), dist) in enumerate(result.ranked_points, 1)
    ]
    if out:
        Path(out).write_text("rank,row,col,distance\n" + "\n".join(lines) + "\n")
    else:
        click.echo("rank,row,col,distance")
        for line in lines:
            click.echo(line)
    if heatmap:
        _write_heatmap(raster, tfeat, frame_field.extent, heatmap)


def _write_heatmap(raster, template_feature, extent, path):
    from PIL import Image

    from .harness import CHI_SQUARE_EPS, _as_values

    tvals = _as_values(template_feature)
    with np.errstate(invalid="ignore"):
        dists = np.sum(
            (raster.features - tvals) ** 2
            / (np.abs(raster.features) + np.abs(tvals) + CHI_SQUARE_EPS),
            axis=1,
        )
    dists = np.where(np.isnan(dists), np.nanmax(dists[np.isfinite(dists)]), dists)
    img = np.zeros(extent)
    scaled = (dists - dists.min()) / (dists.max() - dists.min() + 1e-300)
    img[raster.rows, raster.cols] = 1.0 - scaled  # min distance = white
    Image.fromarray(np.clip(img * 255, 0, 255).astype(np.uint8), mode="L").save(path)


@main.command()
@click.option("--kind", type=click.Choice(["vortex-street", "vortex", "texture"]), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--rows", type=int, default=80, show_default=True)
@click.option("--cols", type=int, default=320, show_default=True)
@click.option("--count", type=int, default=6, show_default=True, help="Vortices in a street.")
@click.option("--radius", type=float, default=8.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_run
def synth(kind, out, rows, cols, count, radius, seed):
    """Write a synthetic field: a vortex street, one vortex, or a texture."""
    rng = np.random.default_rng(seed)
    click.echo(f"seed: {seed}")
    if kind == "texture":
        fieldio.save_field(synth_texture((rows, cols), rng_seed=seed), out, format="raw")
        return
    if kind == "vortex":
        fld = synth_vortex_field(
            (rows, cols), [((rows - 1) / 2, (cols - 1) / 2)], [radius], [1.0]
        )
        fieldio.save_field(fld, out, format="raw")
        return
    margin = max(int(3 * radius), 17)
    xs = np.linspace(margin, cols - 1 - margin, count)
    centers = [(float(rng.uniform(margin, rows - 1 - margin)), float(x)) for x in xs]
    strengths = [float(rng.uniform(0.8, 1.2)) for _ in range(count)]
    orientations = [float(rng.uniform(0, 2 * math.pi)) for _ in range(count)]
    fld = synth_vortex_field(
        (rows, cols), centers, [radius] * count, strengths, orientations,
        background=(0.15, 0.0), rng_seed=seed,
    )
    fieldio.save_field(fld, out, format="raw")


@main.command("mre")
@click.option("--templates-dir", type=click.Path(), required=True)
@click.option("--set", "set_path", type=click.Path(), required=True)
@click.option("--sigma", type=float, required=True)
@click.option("--versions", type=int, default=60, show_default=True)
@click.option("--mask/--no-mask", default=False, show_default=True)
@_run
def mre_cmd(templates_dir, set_path, sigma, versions, mask):
    """Per-invariant mean relative error over special-TR versions."""
    invset = load_invariant_set(set_path)
    paths = sorted(Path(templates_dir).iterdir())
    if not paths:
        raise GhminvError("no template files")
    templates = [fieldio.load_field(p) for p in paths]
    refs = [feature_vector(t, invset, sigma, mask=mask) for t in templates]
    versions_feats = []
    for t in templates:
        row = []
        for j in range(1, versions + 1):
            v = apply_special_tr(t, 2.0 * math.pi * j / versions)
            row.append(feature_vector(v, invset, sigma, mask=mask).values)
        versions_feats.append(row)
    errors = mre(refs, np.array(versions_feats))
    click.echo("invariant,mre_percent")
    for i, err in enumerate(errors, 1):
        click.echo(f"{i},{err:.4f}")


if __name__ == "__main__":
    main()
