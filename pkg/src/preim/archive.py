"""Reduced-model persistence: a directory of CSV payloads plus a manifest.

Floats are written with 17 significant digits, so a save/load round trip is
bit-exact and the online stage reproduces in-process results identically.
The basis matrix is stored but only loaded on request; the online stage
needs nothing whose size scales with the mesh.
"""

import os

import numpy as np

from .pod import RBasis
from .rom import ReducedModel
from .util import float_repr, write_matrix_csv

FORMAT_VERSION = "1"

_MANIFEST_NAME = "manifest.txt"


def _load_matrix(path, dtype=float):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([dtype(tok) for tok in line.split(",")])
    return np.asarray(rows, dtype=dtype)


def save_archive(directory, rom, case_id, refine, algo,
                 eps_pod, eps_eim, eps_rb=None, grid_mode=None):
    """Write the reduced model and its manifest into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    if grid_mode is None:
        grid_mode = "centroids" if rom.gamma_kind == "gradient" else "nodes"
    manifest = {
        "format": FORMAT_VERSION,
        "case": case_id,
        "algo": algo,
        "refine": str(int(refine)),
        "n_rb": str(rom.n_reduced),
        "eim_rank": str(rom.rank),
        "n_steps": str(rom.n_steps),
        "grid_mode": grid_mode,
        "gamma_kind": rom.gamma_kind,
        "eps_pod": float_repr(eps_pod),
        "eps_eim": float_repr(eps_eim),
        "eps_rb": float_repr(eps_rb) if eps_rb is not None else "",
    }
    with open(os.path.join(directory, _MANIFEST_NAME), "w",
              newline="\n", encoding="utf-8") as fh:
        for key, value in manifest.items():
            fh.write(f"{key}={value}\n")

    write_matrix_csv(os.path.join(directory, "Mr.csv"), rom.mass_r)
    write_matrix_csv(os.path.join(directory, "A0r.csv"), rom.stiff_r)
    write_matrix_csv(os.path.join(directory, "fk.csv"), rom.loads_r)
    write_matrix_csv(os.path.join(directory, "u0r.csv"), rom.u0_r[None, :])
    write_matrix_csv(os.path.join(directory, "B.csv"), rom.b_matrix)
    for j in range(rom.rank):
        write_matrix_csv(
            os.path.join(directory, f"Cj_{j + 1}.csv"), rom.c_mats[j])
    with open(os.path.join(directory, "xpoints.csv"), "w",
              newline="\n") as fh:
        for p in rom.points:
            fh.write(f"{int(p)}\n")
    if rom.gamma_kind == "gradient":
        # gradients stacked as two M x N blocks (d/dx then d/dy)
        table = np.vstack([rom.theta_table[:, :, 0], rom.theta_table[:, :, 1]])
    else:
        table = rom.theta_table
    write_matrix_csv(os.path.join(directory, "theta_at_points.csv"), table)
    if rom.eim is not None:
        write_matrix_csv(os.path.join(directory, "q.csv"), rom.eim.q_funcs)
    if rom.basis is not None:
        write_matrix_csv(os.path.join(directory, "basis.csv"),
                         rom.basis.vectors)
    return directory


def load_archive(directory, with_basis=False):
    """Rebuild a ReducedModel from an archive directory.

    The basis matrix (the only mesh-sized payload) is read only when
    ``with_basis`` is set; otherwise the returned model carries
    ``basis=None`` and supports the online stage only.

    Returns
    -------
    (ReducedModel, dict)
        The model and the parsed manifest.
    """
    manifest_path = os.path.join(directory, _MANIFEST_NAME)
    if not os.path.isfile(manifest_path):
        raise FileNotFoundError(f"no manifest found in {directory!r}")
    manifest = {}
    with open(manifest_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line:
                key, _, value = line.partition("=")
                manifest[key] = value
    if manifest.get("format") != FORMAT_VERSION:
        raise ValueError(
            f"unsupported archive format {manifest.get('format')!r}, "
            f"expected {FORMAT_VERSION!r}"
        )

    from .bench import get_case  # deferred: bench depends on rom/fem

    config = get_case(manifest["case"])
    gamma = config.nonlinearity()
    rank = int(manifest["eim_rank"])

    mass_r = _load_matrix(os.path.join(directory, "Mr.csv"))
    stiff_r = _load_matrix(os.path.join(directory, "A0r.csv"))
    loads_r = _load_matrix(os.path.join(directory, "fk.csv"))
    u0_r = _load_matrix(os.path.join(directory, "u0r.csv"))[0]
    b_matrix = _load_matrix(os.path.join(directory, "B.csv"))
    points = _load_matrix(os.path.join(directory, "xpoints.csv"),
                          dtype=int).ravel()
    c_mats = np.stack([
        _load_matrix(os.path.join(directory, f"Cj_{j + 1}.csv"))
        for j in range(rank)
    ])
    table = _load_matrix(os.path.join(directory, "theta_at_points.csv"))
    if gamma.kind == "gradient":
        table = np.stack([table[:rank], table[rank:]], axis=-1)

    basis = None
    if with_basis:
        vectors = _load_matrix(os.path.join(directory, "basis.csv"))
        basis = RBasis(vectors, np.full(vectors.shape[1], np.nan), None)

    n_steps = int(manifest["n_steps"])
    times = np.arange(n_steps + 1) * (config.t_final / config.n_steps)
    rom = ReducedModel(
        mass_r=mass_r,
        stiff_r=stiff_r,
        loads_r=loads_r,
        u0_r=u0_r,
        c_mats=c_mats,
        b_matrix=b_matrix,
        points=points,
        theta_table=table,
        times=times,
        gamma_kind=gamma.kind,
        gamma=gamma,
        basis=basis,
        eim=None,
    )
    return rom, manifest
