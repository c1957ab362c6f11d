"""Regenerate the FCIDUMP fixtures and reference manifests with PySCF.

Usage: python3 scripts/make_fixtures.py [output_dir]
"""
import json
import math
import sys
from pathlib import Path

import numpy as np
from pyscf import ao2mo, cc, fci, gto, mp, scf
from pyscf.tools import fcidump


def nh3_geometry():
    r, angle = 1.012, math.radians(106.7)
    # place the three hydrogens on a cone around z
    cos_t = math.sqrt((1 + 2 * math.cos(angle)) / 3)
    sin_t = math.sqrt(1 - cos_t**2)
    atoms = [("N", (0.0, 0.0, 0.0))]
    for k in range(3):
        phi = 2 * math.pi * k / 3
        atoms.append(("H", (r * sin_t * math.cos(phi), r * sin_t * math.sin(phi), -r * cos_t)))
    return atoms


def ch2o_geometry():
    r_co, r_ch, hch = 1.2050, 1.1110, math.radians(116.133)
    half = hch / 2
    return [
        ("C", (0.0, 0.0, 0.0)),
        ("O", (0.0, 0.0, r_co)),
        ("H", (0.0, r_ch * math.sin(half), -r_ch * math.cos(half))),
        ("H", (0.0, -r_ch * math.sin(half), -r_ch * math.cos(half))),
    ]


MOLECULES = {
    "h2": [("H", (0, 0, 0)), ("H", (0, 0, 0.7414))],
    "lih": [("Li", (0, 0, 0)), ("H", (0, 0, 1.5949))],
    "beh2": [("Be", (0, 0, 0)), ("H", (0, 0, 1.3264)), ("H", (0, 0, -1.3264))],
    "nh3": nh3_geometry(),
    "ch2o": ch2o_geometry(),
}

FCI_LIMIT = 40_000


def run(name, atoms, out):
    mol = gto.M(atom=atoms, basis="sto-3g", unit="Angstrom", verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.conv_tol_grad = 1e-10
    mf.kernel()
    assert mf.converged
    norb = mf.mo_coeff.shape[1]
    nelec = mol.nelectron
    fcidump.from_scf(mf, str(out / f"{name}.fcidump"), tol=1e-15)

    h1 = mf.mo_coeff.T @ mf.get_hcore() @ mf.mo_coeff
    eri = ao2mo.restore(1, ao2mo.kernel(mol, mf.mo_coeff), norb)
    manifest = {
        "molecule": name,
        "basis": "sto-3g",
        "geometry_angstrom": [[a, list(map(float, x))] for a, x in atoms],
        "n_orbitals": int(norb),
        "n_electrons": int(nelec),
        "core_energy": float(mol.energy_nuc()),
        "hf_energy": float(mf.e_tot),
        "orbital_energies": [float(e) for e in mf.mo_energy],
        "eri_1111": float(eri[0, 0, 0, 0]),
        "h_11": float(h1[0, 0]),
    }
    pt = mp.MP2(mf)
    pt.kernel()
    manifest["mp2_correlation_energy"] = float(pt.e_corr)
    mycc = cc.CCSD(mf)
    mycc.conv_tol = 1e-10
    mycc.kernel()
    manifest["ccsd_energy"] = float(mycc.e_tot)
    manifest["ccsd_t_energy"] = float(mycc.e_tot + mycc.ccsd_t())
    n_alpha = nelec // 2
    dim = math.comb(norb, n_alpha) ** 2
    manifest["fci_dimension"] = dim
    if dim <= FCI_LIMIT:
        solver = fci.direct_spin1.FCI()
        solver.conv_tol = 1e-12
        e, _ = solver.kernel(h1, eri, norb, nelec, ecore=mol.energy_nuc())
        manifest["fci_energy"] = float(e)
    (out / f"{name}.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(name, json.dumps({k: manifest[k] for k in ("hf_energy", "fci_energy") if k in manifest}))


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "fixtures")
    out.mkdir(parents=True, exist_ok=True)
    for name, atoms in MOLECULES.items():
        run(name, atoms, out)


if __name__ == "__main__":
    main()
