"""Command-line frontends: color jobs, reference transfer, the HTTP service.

Flag mistakes exit 2 (click usage errors); pipeline failures exit 1.
"""

from __future__ import annotations

import os
import sys
from typing import Optional

import click

from .colors import RegionColorTarget, parse_hex_color
from .errors import MakeupError
from .harmonize import CompositionConfig, GuidanceConfig
from .imageio import load_image, load_labelmap, save_image, save_mask
from .pipeline import MakeupJob, MakeupSpec, ReferenceInput, run_makeup
from .regions import SoftMask
from .service import BACKENDS, build_backend, create_app


class HexColorType(click.ParamType):
    name = "hexcolor"

    def convert(self, value, param, ctx):
        try:
            parse_hex_color(value)
        except MakeupError as e:
            self.fail(str(e), param, ctx)
        return value


HEX_COLOR = HexColorType()


def _sampling_options(fn):
    for deco in reversed(
        [
            click.option("--t-star", type=click.IntRange(1, 1000), default=300, show_default=True, help="Early-stop inversion timestep."),
            click.option("--inversion-steps", type=click.IntRange(1), default=20, show_default=True),
            click.option("--reverse-steps", type=click.IntRange(1), default=30, show_default=True),
            click.option("--lam", type=click.FloatRange(0.0, 1.0), default=0.15, show_default=True, help="Identity-guidance blend strength."),
            click.option("--apply-steps", type=click.IntRange(0), default=2, show_default=True, help="Reverse steps that apply guidance."),
            click.option("--backend", type=click.Choice(sorted(BACKENDS)), default=None, envvar="MAKEUP_BACKEND", help="Denoiser backend (default: toy)."),
            click.option("--out", type=click.Path(dir_okay=False, writable=True), required=True, help="Output PNG path."),
            click.option("--debug-dir", type=click.Path(file_okay=False), default=None, help="Dump intermediates (clean estimate, masks) here."),
        ]
    ):
        fn = deco(fn)
    return fn


def _load_inputs(image_path: str, labels_path: Optional[str]):
    img = load_image(image_path)
    labelmap = load_labelmap(labels_path) if labels_path else None
    return img, labelmap


def _execute(job: MakeupJob, out: str, debug_dir: Optional[str]) -> None:
    try:
        result = run_makeup(job)
    except MakeupError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    save_image(out, result.output)
    if debug_dir:
        os.makedirs(debug_dir, exist_ok=True)
        for name, arr in result.intermediates.items():
            path = os.path.join(debug_dir, f"{name}.png")
            if arr.ndim == 2:
                save_mask(path, SoftMask(grid=arr, region=name))
            else:
                save_image(path, arr)
    click.echo(out)


@click.group()
def main() -> None:
    """Diffusion-based makeup editing."""


@main.command()
@click.option("--image", "image_path", type=click.Path(exists=True, dir_okay=False), required=True, help="Source photo (PNG/JPEG).")
@click.option("--labels", "labels_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Region label map; omitted = built-in fixture segmenter.")
@click.option("--lips", type=HEX_COLOR, default=None, help="Lip color, #RRGGBB.")
@click.option("--skin", type=HEX_COLOR, default=None, help="Skin tone, #RRGGBB.")
@click.option("--eyeshadow", type=HEX_COLOR, default=None, help="Eyeshadow color, #RRGGBB.")
@click.option("--alpha", type=click.FloatRange(0.0, 1.0), default=0.8, show_default=True, help="Color transfer strength.")
@click.option("--concept", "concepts", multiple=True, help="Weighted prompt, e.g. 'glossy lips:0.6'; repeatable.")
@click.option("--prompt", default="a photo of a woman", show_default=True, help="Main prompt shared by inversion and sampling.")
@_sampling_options
def color(image_path, labels_path, lips, skin, eyeshadow, alpha, concepts, prompt,
          t_star, inversion_steps, reverse_steps, lam, apply_steps, backend, out, debug_dir):
    """Recolor regions toward target palette colors."""
    targets = []
    for region, hex_color in (("lip", lips), ("skin", skin), ("eyeshadow", eyeshadow)):
        if hex_color is not None:
            targets.append(RegionColorTarget.from_hex(region, hex_color, alpha))
    if not targets and not concepts:
        raise click.UsageError("nothing to do: give --lips/--skin/--eyeshadow or --concept")
    img, labelmap = _load_inputs(image_path, labels_path)
    try:
        spec = MakeupSpec(
            color_targets=tuple(targets),
            composition=CompositionConfig.from_entries(prompt, list(concepts)),
            guidance=GuidanceConfig(lam=lam, apply_steps=apply_steps),
            t_star=t_star,
            inversion_steps=inversion_steps,
            reverse_steps=reverse_steps,
            debug=debug_dir is not None,
        )
        job = MakeupJob(
            source_image=img,
            spec=spec,
            backend=build_backend(backend or "toy"),
            labelmap=labelmap,
            use_fixture_segmenter=labelmap is None,
        )
    except MakeupError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    _execute(job, out, debug_dir)


@main.command()
@click.option("--image", "image_path", type=click.Path(exists=True, dir_okay=False), required=True, help="Source photo.")
@click.option("--labels", "labels_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--reference", "reference_path", type=click.Path(exists=True, dir_okay=False), required=True, help="Makeup reference photo.")
@click.option("--reference-labels", "reference_labels_path", type=click.Path(exists=True, dir_okay=False), default=None)
@_sampling_options
def transfer(image_path, labels_path, reference_path, reference_labels_path,
             t_star, inversion_steps, reverse_steps, lam, apply_steps, backend, out, debug_dir):
    """Transfer makeup from a reference photo onto the source."""
    img, labelmap = _load_inputs(image_path, labels_path)
    try:
        ref_img = load_image(reference_path)
        if reference_labels_path:
            ref_map = load_labelmap(reference_labels_path)
        else:
            from .fixtures import fixture_segmenter

            ref_map = fixture_segmenter(ref_img)
        spec = MakeupSpec(
            reference=ReferenceInput(image=ref_img, labelmap=ref_map),
            guidance=GuidanceConfig(lam=lam, apply_steps=apply_steps),
            t_star=t_star,
            inversion_steps=inversion_steps,
            reverse_steps=reverse_steps,
            debug=debug_dir is not None,
        )
        job = MakeupJob(
            source_image=img,
            spec=spec,
            backend=build_backend(backend or "toy"),
            labelmap=labelmap,
            use_fixture_segmenter=labelmap is None,
        )
    except MakeupError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    _execute(job, out, debug_dir)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=None, envvar="MAKEUP_PORT", help="Port (default 8765).")
@click.option("--backend", type=click.Choice(sorted(BACKENDS)), default=None, envvar="MAKEUP_BACKEND")
@click.option("--workers", type=click.IntRange(1), default=None, envvar="MAKEUP_WORKERS")
@click.option("--store-dir", type=click.Path(file_okay=False), default=None, envvar="MAKEUP_STORE_DIR")
def serve(host, port, backend, workers, store_dir):
    """Run the HTTP job service."""
    import uvicorn

    app = create_app(store_dir=store_dir, default_backend=backend, workers=workers)
    uvicorn.run(app, host=host, port=int(port) if port is not None else 8765)


if __name__ == "__main__":  # pragma: no cover
    main()
