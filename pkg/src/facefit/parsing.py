"""Face-parsing label maps, visibility masks and edge-guided label fusion.

Schemas are data-driven: a schema is an index -> category-name table, either
one of the built-ins below or loaded from a plain-text "index name" file.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SchemaError, ShapeMismatchError

HELEN11 = {
    0: "background", 1: "skin", 2: "left_brow", 3: "right_brow",
    4: "left_eye", 5: "right_eye", 6: "nose", 7: "upper_lip",
    8: "mouth", 9: "lower_lip", 10: "hair",
}

CELEBAMASK19 = {
    0: "background", 1: "skin", 2: "nose", 3: "eyeglass", 4: "left_eye",
    5: "right_eye", 6: "left_brow", 7: "right_brow", 8: "left_ear",
    9: "right_ear", 10: "mouth", 11: "upper_lip", 12: "lower_lip",
    13: "hair", 14: "hat", 15: "earring", 16: "necklace", 17: "neck",
    18: "cloth",
}

BUILTIN_SCHEMAS = {"helen11": HELEN11, "celebamask19": CELEBAMASK19}

# categories that belong to the facial surface proper
FACIAL_SURFACE = {
    "skin", "nose", "left_eye", "right_eye", "left_brow", "right_brow",
    "mouth", "upper_lip", "lower_lip",
}

DEFAULT_OCCLUDERS = {
    "helen11": {"hair"},
    "celebamask19": {"eyeglass", "hair", "hat", "earring", "necklace",
                     "neck", "cloth"},
}


def load_schema(path):
    """Read an "index name" schema file."""
    table = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            idx, name = line.split()
            table[int(idx)] = name
    if not table:
        raise SchemaError(f"empty schema file: {path}")
    return table


def resolve_schema(schema):
    """Accept a schema name, a path to a schema file, or a table."""
    if isinstance(schema, dict):
        return schema
    if schema in BUILTIN_SCHEMAS:
        return BUILTIN_SCHEMAS[schema]
    return load_schema(schema)


@dataclass
class ParsingMap:
    """Per-pixel semantic labels under a declared schema."""

    labels: np.ndarray
    schema: object = "celebamask19"

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 2:
            raise ValueError("labels must be a 2-D array")
        self.table = resolve_schema(self.schema)
        valid = set(self.table)
        present = set(np.unique(self.labels).tolist())
        unknown = present - valid
        if unknown:
            raise SchemaError(f"labels {sorted(unknown)} not in schema")

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]

    def indices_of(self, names):
        """Label indices for a set of category names."""
        by_name = {v: k for k, v in self.table.items()}
        bad = [n for n in names if n not in by_name]
        if bad:
            raise SchemaError(
                f"unknown categories {bad}; valid: {sorted(by_name)}")
        return {by_name[n] for n in names}


def visibility_mask(parsing, occluders=None):
    """Boolean mask: pixel visible iff facial-surface and not an occluder."""
    if occluders is None:
        name = parsing.schema if isinstance(parsing.schema, str) else None
        occluders = DEFAULT_OCCLUDERS.get(name, set())
    occ_idx = parsing.indices_of(set(occluders))
    facial = {n for n in FACIAL_SURFACE if n in parsing.table.values()}
    fac_idx = parsing.indices_of(facial)
    mask = np.isin(parsing.labels, sorted(fac_idx - occ_idx))
    return mask


def _neighborhood_stack(arr, fill):
    """3x3 shifted copies of arr, padded with fill: shape (9, H, W)."""
    h, w = arr.shape
    pad = np.full((h + 2, w + 2), fill, dtype=arr.dtype)
    pad[1:-1, 1:-1] = arr
    return np.stack([pad[r:r + h, c:c + w]
                     for r in range(3) for c in range(3)])


def fuse_parsing_edges(parsing, edges, edge_threshold=0.5, occluders=None):
    """Reassign occluder pixels that hug a strong edge on the facial side.

    An occluder-labeled pixel lying within 1 px of an edge value >=
    edge_threshold and having at least one facial-surface neighbor takes the
    majority facial label of its 3x3 neighborhood.  Internally iterated to a
    fixpoint so re-applying the operation is a no-op; only pixels that were
    occluder-labeled in the input ever change.
    """
    values = edges.values if hasattr(edges, "values") else np.asarray(edges, float)
    if values.shape != parsing.labels.shape:
        raise ShapeMismatchError(
            f"parsing {parsing.labels.shape} vs edges {values.shape}")
    if occluders is None:
        name = parsing.schema if isinstance(parsing.schema, str) else None
        occluders = DEFAULT_OCCLUDERS.get(name, set())
    occ_idx = parsing.indices_of(set(occluders))
    fac_idx = parsing.indices_of(
        {n for n in FACIAL_SURFACE if n in parsing.table.values()})

    strong = values >= edge_threshold
    near_edge = _neighborhood_stack(strong, False).any(axis=0)

    labels = parsing.labels.copy()
    occ_list = sorted(occ_idx)
    fac_list = sorted(fac_idx)
    while True:
        nbh = _neighborhood_stack(labels, -1)
        is_occ = np.isin(labels, occ_list)
        counts = np.stack([(nbh == f).sum(axis=0) for f in fac_list])
        has_facial = counts.sum(axis=0) > 0
        change = is_occ & near_edge & has_facial
        if not change.any():
            break
        majority = np.asarray(fac_list)[np.argmax(counts, axis=0)]
        labels[change] = majority[change]
    return ParsingMap(labels, parsing.schema)
