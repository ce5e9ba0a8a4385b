# texlayout/services/export_service.py

import io
import json
import random
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from PIL import Image                                                           # Page image IO and crops

from texlayout.logger import get_logger                                         # Custom application logger
from texlayout.models.genome import DocumentGenome
from texlayout.models.quality import Tier
from texlayout.models.unit import AttributeLabel
from texlayout.services.exceptions import PageMismatch, SchemaViolation, SourceIOError
from texlayout.utils import atomic_write_bytes

logger = get_logger(__name__) # Logger instance for this module

TRANSFORMATION_ATTRIBUTES = (AttributeLabel.EQUATION, AttributeLabel.TABLE)
UNCATEGORIZED = 'uncategorized'


def page_image_path(pages_dir, page_index: int) -> Path:
    return Path(pages_dir) / f"page_{page_index:03d}.png"


def _page_sizes(genome: DocumentGenome, pages_dir=None) -> List[Tuple[int, int]]:
    if len(genome.page_sizes) == genome.page_count:
        return [(int(width), int(height)) for width, height in genome.page_sizes]
    if pages_dir is not None:
        sizes = []
        for page_index in range(genome.page_count):
            try:
                with Image.open(page_image_path(pages_dir, page_index)) as image:
                    sizes.append(image.size)
            except OSError as e:
                raise SourceIOError(message=f"Cannot read page {page_index} of {genome.doc_id}: {e}",
                                    original_exception=e)
        return sizes
    raise SchemaViolation(message=f"Genome {genome.doc_id} records no page sizes and no page images were given",
                          errors={'page_sizes': 'missing'})


def export_layout_labels(genome: DocumentGenome, out_dir, pages_dir=None) -> List[Path]:
    """
    Writes one YOLO-style label file per page, `<doc_id>_page_NNN.txt`, with
    a `class cx cy w h` line per box. Class is the attribute index and the
    coordinates are fractions of the page size. Pages without boxes get an
    empty file.
    """
    sizes = _page_sizes(genome, pages_dir)
    lines: Dict[int, List[str]] = {page_index: [] for page_index in range(genome.page_count)}
    for unit in genome.units:
        for box in unit.boxes:
            width, height = sizes[box.page_index]
            lines[box.page_index].append(
                f"{unit.attribute.index} {(box.x0 + box.x1) / 2 / width:.6f} {(box.y0 + box.y1) / 2 / height:.6f} "
                f"{box.width / width:.6f} {box.height / height:.6f}"
            )

    paths = []
    for page_index, page_lines in lines.items():
        content = ''.join(line + '\n' for line in page_lines)
        paths.append(atomic_write_bytes(Path(out_dir) / f"{genome.doc_id}_page_{page_index:03d}.txt",
                                        content.encode('utf-8')))
    logger.info(f"Service: exported layout labels of {genome.doc_id} for {len(paths)} pages")
    return paths


def export_transformation_pairs(genome: DocumentGenome, pages_dir, out_dir) -> Path:
    """
    Crops every Equation and Table box out of the rendered pages and pairs
    each crop with the unit's LaTeX source.

    Args:
        genome (DocumentGenome): A rendered genome.
        pages_dir (str | Path): Holds `page_NNN.png` images at the genome dpi.
        out_dir (str | Path): Receives `images/` and `pairs.jsonl`.

    Returns:
        Path: The written `pairs.jsonl`.

    Raises:
        SourceIOError: If a page image is missing.
        PageMismatch: If a page image size disagrees with the genome.
    """
    out_dir = Path(out_dir)
    sizes = genome.page_sizes
    pages: Dict[int, Image.Image] = {}

    def page(page_index: int) -> Image.Image:
        if page_index not in pages:
            path = page_image_path(pages_dir, page_index)
            try:
                with Image.open(path) as image:
                    pages[page_index] = image.convert('L')
            except OSError as e:
                raise SourceIOError(message=f"Cannot read page image {path}: {e}", original_exception=e)
            if page_index < len(sizes) and list(pages[page_index].size) != list(sizes[page_index]):
                raise PageMismatch(message=f"{path.name} is {pages[page_index].size}, genome says {sizes[page_index]}",
                                   errors={f"page[{page_index}]": "size differs"})
        return pages[page_index]

    rows = []
    for unit in genome.units:
        if unit.attribute not in TRANSFORMATION_ATTRIBUTES:
            continue
        for part, box in enumerate(unit.boxes):
            crop = page(box.page_index).crop((box.x0, box.y0, box.x1, box.y1))
            buffer = io.BytesIO()
            crop.save(buffer, format='PNG')
            image_name = f"images/{genome.doc_id}_u{unit.unit_id:04d}_p{part}.png"
            atomic_write_bytes(out_dir / image_name, buffer.getvalue())
            rows.append({'image': image_name, 'latex': unit.raw_source, 'attribute': unit.attribute.label_name})

    content = ''.join(json.dumps(row, sort_keys=True, ensure_ascii=False) + '\n' for row in rows)
    path = atomic_write_bytes(out_dir / 'pairs.jsonl', content.encode('utf-8'))
    logger.info(f"Service: exported {len(rows)} transformation pairs of {genome.doc_id}")
    return path


def discipline_of(genome: DocumentGenome) -> str:
    """Primary category of the sidecar metadata, e.g. `cs.CL`."""
    return genome.categories[0] if genome.categories else UNCATEGORIZED


def select_test_split(genomes: Sequence[DocumentGenome], per_discipline: int,
                      seed: Optional[int] = 0) -> Dict[str, List[str]]:
    """
    Samples up to `per_discipline` Tier1 documents from every discipline.

    The draw depends only on the seed and the set of doc ids, never on the
    order genomes are passed in.

    Returns:
        dict: Discipline -> sorted doc ids.
    """
    if per_discipline < 0:
        raise ValueError("per_discipline must be non-negative")
    pools: Dict[str, List[str]] = {}
    for genome in genomes:
        if genome.quality.tier == Tier.TIER1:
            pools.setdefault(discipline_of(genome), []).append(genome.doc_id)

    rng = random.Random(seed)
    split = {}
    for discipline in sorted(pools):
        candidates = sorted(pools[discipline])
        split[discipline] = sorted(rng.sample(candidates, min(per_discipline, len(candidates))))
    logger.info(f"Service: test split of {sum(map(len, split.values()))} documents over {len(split)} disciplines")
    return split
