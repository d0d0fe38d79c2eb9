"""CSV tables and legacy VTK output."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

from .solver import CoupledSolution

CSV_HEADER = ["mesh", "level", "h", "dof", "e_star", "rate", "iters"]
VTK_FIELDS = ("u_mag", "p", "zeta_mag", "phi")


def export_csv(rows: Iterable, path) -> None:
    """Write convergence rows (objects with ``csv_fields()``) under the fixed header."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.csv_fields())


def export_vtk(sol: CoupledSolution, path) -> None:
    """Legacy ASCII unstructured grid with one polygon cell per element.

    Cell data: element means of |u|, p, |zeta| and phi from the projected fields.
    """
    mesh = sol.disc.mesh
    fields = sol.element_means()
    lines = ["# vtk DataFile Version 3.0", "vem-sad solution", "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_vertices} double"]
    lines += [f"{x:.16e} {y:.16e} 0.0" for x, y in mesh.vertices]
    size = sum(len(l) + 1 for l in mesh.elements)
    lines.append(f"CELLS {mesh.n_elements} {size}")
    lines += [" ".join(map(str, [len(l), *l.tolist()])) for l in mesh.elements]
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    lines += ["7"] * mesh.n_elements
    lines.append(f"CELL_DATA {mesh.n_elements}")
    for name in VTK_FIELDS:
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [f"{v:.16e}" for v in fields[name]]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk_cell_data(path) -> dict:
    """Minimal reader for files written by :func:`export_vtk` (used in checks)."""
    toks = Path(path).read_text().split()
    out = {"points": None, "cells": [], "types": [], "fields": {}}
    i = 0
    while i < len(toks):
        t = toks[i]
        if t == "POINTS":
            n = int(toks[i + 1])
            vals = list(map(float, toks[i + 3:i + 3 + 3 * n]))
            out["points"] = [vals[3 * j:3 * j + 3] for j in range(n)]
            i += 3 + 3 * n
        elif t == "CELLS":
            n = int(toks[i + 1])
            i += 3
            for _ in range(n):
                m = int(toks[i])
                out["cells"].append(list(map(int, toks[i + 1:i + 1 + m])))
                i += 1 + m
        elif t == "CELL_TYPES":
            n = int(toks[i + 1])
            out["types"] = list(map(int, toks[i + 2:i + 2 + n]))
            i += 2 + n
        elif t == "SCALARS":
            name = toks[i + 1]
            n = len(out["cells"])
            out["fields"][name] = list(map(float, toks[i + 6:i + 6 + n]))
            i += 6 + n
        else:
            i += 1
    return out
