"""Corpus expansion: classical augmentations, MosaicSlice and provenance manifests.

Every output gets one manifest entry recording its inputs, the concrete
operation chain and the seed, which is enough to regenerate it byte for byte
(see `replay_entry`).  Seeds are derived from the global seed and the item's
relative path, so results do not depend on worker count or scheduling.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .edges import gaussian_blur, smooth
from .imgcore import (Rect, atomic_write_bytes, check_image, encode_image, hflip, load_image,
                      to_uint8)
from .metrics import list_images
from .mosaic import (CODES, TileFigures, derive_seed, inter_mix, inter_partners, intra_mosaicslice,
                     load_figures)

log = logging.getLogger(__name__)

KINDS = ("brightness", "sharpen", "hist_eq", "hflip", "gauss_noise", "blur")
BRIGHTNESS_RANGE = (1.01, 1.03)
# the single tunable of each kind, as named on the command line
PRIMARY_PARAM = {"brightness": "factor", "sharpen": "amount", "gauss_noise": "sigma", "blur": "sigma"}
DEFAULTS = {"sharpen": {"amount": 1.0, "sigma": 1.0}, "gauss_noise": {"sigma": 5.0}, "blur": {"sigma": 1.0}}
MANIFEST_NAME = "manifest.jsonl"
MOSAIC_MODES = ("none", "intra", "inter")


@dataclass(frozen=True)
class AugmentOp:
    kind: str
    params: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown augmentation {self.kind!r}")
        p = self.params
        if self.kind == "brightness":
            f = p.get("factor")
            if f is None or not BRIGHTNESS_RANGE[0] <= f <= BRIGHTNESS_RANGE[1]:
                raise ValueError(f"brightness factor must lie in {list(BRIGHTNESS_RANGE)}, got {f}")
        for key in ("sigma",):
            if key in p and not p[key] > 0:
                raise ValueError(f"{self.kind}: {key} must be > 0")
        if self.kind == "sharpen" and not p.get("amount", 1.0) >= 0:
            raise ValueError("sharpen: amount must be >= 0")

    def resolved(self, seed: int) -> "AugmentOp":
        """Fill unspecified parameters; a missing brightness factor is drawn from the seed."""
        params = {**DEFAULTS.get(self.kind, {}), **self.params}
        if self.kind == "brightness" and "factor" not in params:
            rng = np.random.default_rng(seed)
            params["factor"] = round(float(rng.uniform(*BRIGHTNESS_RANGE)), 4)
        op = AugmentOp(self.kind, params)
        op.validate()
        return op

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


def parse_ops(spec: str) -> list[list[AugmentOp]]:
    """``"brightness,hflip+blur=1.5"`` -> chains ``[[brightness], [hflip, blur(1.5)]]``."""
    chains = []
    for chain_text in spec.split(","):
        chain_text = chain_text.strip()
        if not chain_text:
            continue
        chain = []
        for item in chain_text.split("+"):
            kind, _, value = item.strip().partition("=")
            if kind not in KINDS:
                raise ValueError(f"unknown augmentation {kind!r}")
            params = {}
            if value:
                if kind not in PRIMARY_PARAM:
                    raise ValueError(f"{kind} takes no parameter")
                params[PRIMARY_PARAM[kind]] = float(value)
            op = AugmentOp(kind, params)
            if params:
                op.resolved(0)
            chain.append(op)
        chains.append(chain)
    return chains


def _per_channel(img: np.ndarray, fn) -> np.ndarray:
    if img.ndim == 2:
        return fn(img)
    return np.stack([fn(img[:, :, c]) for c in range(img.shape[2])], axis=-1)


def _equalize(plane: np.ndarray) -> np.ndarray:
    hist = np.bincount(plane.ravel(), minlength=256)
    cdf = np.cumsum(hist)
    cdf_min = cdf[np.nonzero(hist)[0][0]]
    total = plane.size
    if total == cdf_min:
        return plane.copy()
    lut = to_uint8((cdf - cdf_min) / (total - cdf_min) * 255.0)
    return lut[plane]


def apply_augmentation(img: np.ndarray, op: AugmentOp, seed: int = 0) -> np.ndarray:
    img = check_image(img)
    op.validate()
    p = {**DEFAULTS.get(op.kind, {}), **op.params}
    if op.kind == "brightness":
        return to_uint8(img.astype(np.float64) * p["factor"])
    if op.kind == "sharpen":
        planes = img.astype(np.float64)
        blurred = smooth(planes, p["sigma"]) if img.ndim == 2 else \
            np.moveaxis(smooth(np.moveaxis(planes, -1, 0), p["sigma"]), 0, -1)
        return to_uint8(planes + p["amount"] * (planes - blurred))
    if op.kind == "hist_eq":
        return _per_channel(img, _equalize)
    if op.kind == "hflip":
        return hflip(img)
    if op.kind == "gauss_noise":
        rng = np.random.default_rng(seed)
        return to_uint8(img.astype(np.float64) + rng.normal(0.0, p["sigma"], img.shape))
    return gaussian_blur(img, p["sigma"])


def apply_chain(img: np.ndarray, chain: list[AugmentOp], seed: int) -> np.ndarray:
    for k, op in enumerate(chain):
        img = apply_augmentation(img, op, derive_seed(seed, k))
    return img


@dataclass
class ManifestEntry:
    source: list[str]
    ops: list[dict]
    seed: int | None
    output: str | None
    warnings: list[str] = field(default_factory=list)
    # where each source lives: "src" (input dir) or "out" (an earlier output)
    source_root: str = "src"

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class AugmentationManifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def append(self, entry: ManifestEntry) -> None:
        self.entries.append(entry)

    @property
    def outputs(self) -> list[str]:
        return [e.output for e in self.entries if e.output is not None]

    def dumps(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.entries)

    def write(self, path: str | Path) -> None:
        atomic_write_bytes(path, self.dumps().encode())

    @classmethod
    def read(cls, path: str | Path) -> "AugmentationManifest":
        entries = [ManifestEntry(**json.loads(line))
                   for line in Path(path).read_text().splitlines() if line.strip()]
        return cls(entries)


@dataclass
class _Item:
    key: str  # relative path used for naming and seeding
    image: np.ndarray
    figures: TileFigures
    root: str


def _code_name(code: str) -> str:
    return code.replace("'", "p")


def _mirror(r: Rect, width: int) -> Rect:
    return Rect(width - r.x - r.w, r.y, r.w, r.h)


def _figures_for(img: np.ndarray, base: TileFigures | None, flips: int) -> TileFigures:
    if base is None or base.tile.shape[:2] != img.shape[:2]:
        return TileFigures.split(img)
    a, b = base.figure_a, base.figure_b
    if flips % 2:
        a, b = _mirror(a, img.shape[1]), _mirror(b, img.shape[1])
    return TileFigures(img, a, b)


def _rects(t: TileFigures) -> list[list[int]]:
    return [list(t.figure_a), list(t.figure_b)]


def _stem(key: str) -> str:
    return key.rsplit(".", 1)[0]


class _Writer:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir

    def __call__(self, rel: str, img: np.ndarray) -> None:
        atomic_write_bytes(self.out_dir / rel, encode_image(img, "PNG"))


def _run(tasks, threads: int):
    if threads <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: t(), tasks))


def expand_corpus(src_dir: str | Path, out_dir: str | Path, chains: list[list[AugmentOp]] | None = None,
                  mosaic: str = "none", global_seed: int = 0, variants_per_image: int = 0,
                  threads: int = 1, seam_width: int = 8) -> AugmentationManifest:
    """Expand every image under ``src_dir`` into ``out_dir``.

    ``variants_per_image`` classical variants are made per image, cycling
    through ``chains``.  Mosaic mixing then runs over the variants (or over
    the sources when no variants are requested): ``intra`` yields 8 outputs
    per image and ``inter`` 24 (3 seeded partners x 8 compositions).
    The manifest is written to ``out_dir/manifest.jsonl`` once all outputs exist.
    """
    src_dir, out_dir = Path(src_dir), Path(out_dir)
    if mosaic not in MOSAIC_MODES:
        raise ValueError(f"unknown mosaic mode {mosaic!r}")
    if variants_per_image < 0:
        raise ValueError("variants_per_image must be >= 0")
    chains = chains or []
    if variants_per_image and not chains:
        raise ValueError("variants requested but no augmentation ops given")
    paths = list_images(src_dir)
    if not paths:
        raise ValueError(f"empty directory: {src_dir}")
    write = _Writer(out_dir)
    manifest = AugmentationManifest()

    sources: list[_Item] = []
    for path in paths:
        key = path.relative_to(src_dir).as_posix()
        try:
            img = load_image(path)
            figures = load_figures(img, path.with_suffix(".rects"))
        except Exception as exc:
            log.warning("skipping %s: %s", key, exc)
            manifest.append(ManifestEntry([key], [], None, None, [f"unreadable: {exc}"]))
            continue
        sources.append(_Item(key, img, figures, "src"))

    base = sources
    if variants_per_image:
        def variant_task(item: _Item, k: int):
            def task():
                chain_seed = derive_seed(global_seed, item.key, "variant", k)
                chain = [op.resolved(derive_seed(chain_seed, "param", i))
                         for i, op in enumerate(chains[k % len(chains)])]
                out = apply_chain(item.image, chain, chain_seed)
                rel = f"aug/{_stem(item.key)}__v{k}.png"
                write(rel, out)
                flips = sum(op.kind == "hflip" for op in chain)
                entry = ManifestEntry([item.key], [op.to_dict() for op in chain], chain_seed, rel)
                return entry, _Item(rel, out, _figures_for(out, item.figures, flips), "out")
            return task

        results = _run([variant_task(item, k) for item in sources for k in range(variants_per_image)], threads)
        for entry, _ in results:
            manifest.append(entry)
        base = [item for _, item in results]

    if mosaic == "intra":
        def intra_task(item: _Item):
            def task():
                outs = intra_mosaicslice(item.figures, seam_width=seam_width)
                entries = []
                for code, out in zip(CODES, outs):
                    rel = f"intra/{_stem(item.key)}__{_code_name(code)}.png"
                    write(rel, out)
                    op = {"kind": "intra_mosaicslice", "code": code, "seam_width": seam_width,
                          "rects": _rects(item.figures)}
                    entries.append(ManifestEntry([item.key], [op], None, rel, source_root=item.root))
                return entries
            return task

        for entries in _run([intra_task(item) for item in base], threads):
            for e in entries:
                manifest.append(e)

    elif mosaic == "inter":
        if len(base) < 2:
            raise ValueError("inter mixing needs at least two readable images")

        def color(item: _Item) -> tuple[TileFigures, list[str]]:
            if item.image.ndim == 3:
                return item.figures, []
            rgb = np.repeat(item.image[:, :, None], 3, axis=2)
            f = item.figures
            return TileFigures(rgb, f.figure_a, f.figure_b), ["gray tile expanded to RGB"]

        def inter_task(i: int):
            def task():
                item = base[i]
                fa, warn_a = color(item)
                entries = []
                for slot, j in enumerate(inter_partners(len(base), i, global_seed)):
                    partner = base[j]
                    fb, warn_b = color(partner)
                    for code in CODES:
                        seed = derive_seed(global_seed, item.key, "inter", slot, code)
                        mix = inter_mix(fa, fb, seed, code)
                        rel = f"inter/{_stem(item.key)}__x{slot}__{_code_name(code)}.png"
                        write(rel, mix.image)
                        op = {"kind": "inter_mosaicslice", "code": code, "partner_slot": slot,
                              "rects": [_rects(fa), _rects(fb)]}
                        entries.append(ManifestEntry([item.key, partner.key], [op], seed, rel,
                                                     warn_a + warn_b + mix.warnings, source_root=item.root))
                return entries
            return task

        for entries in _run([inter_task(i) for i in range(len(base))], threads):
            for e in entries:
                manifest.append(e)

    manifest.entries.sort(key=lambda e: (e.output or "", e.source))
    manifest.write(out_dir / MANIFEST_NAME)
    return manifest


def replay_entry(entry: ManifestEntry, src_dir: str | Path, out_dir: str | Path) -> np.ndarray:
    """Regenerate one output from its recorded inputs, ops and seed."""
    root = Path(src_dir) if entry.source_root == "src" else Path(out_dir)
    images = [load_image(root / s) for s in entry.source]
    if not entry.ops:
        raise ValueError("entry has no operations to replay")
    kind = entry.ops[0]["kind"]
    if kind == "intra_mosaicslice":
        op = entry.ops[0]
        a, b = op["rects"]
        outs = intra_mosaicslice(TileFigures(images[0], Rect(*a), Rect(*b)), seam_width=op["seam_width"])
        return outs[CODES.index(op["code"])]
    if kind == "inter_mosaicslice":
        op = entry.ops[0]
        tiles = []
        for img, (a, b) in zip(images, op["rects"]):
            if img.ndim == 2:
                img = np.repeat(img[:, :, None], 3, axis=2)
            tiles.append(TileFigures(img, Rect(*a), Rect(*b)))
        return inter_mix(tiles[0], tiles[1], entry.seed, op["code"]).image
    chain = []
    for d in entry.ops:
        d = dict(d)
        chain.append(AugmentOp(d.pop("kind"), d))
    return apply_chain(images[0], chain, entry.seed)
