"""NH3/cc-pCVDZ with the N 1s orbital frozen: 32 spatial orbitals, 8 electrons.

Not committed (about 10 MB). Usage: python3 scripts/make_large_nh3.py [out.fcidump]
"""
import sys

from pyscf import gto, mcscf, scf
from pyscf.tools import fcidump

from make_fixtures import nh3_geometry

N_FROZEN = 1


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "nh3_ccpcvdz.fcidump"
    mol = gto.M(atom=nh3_geometry(), basis={"N": "cc-pcvdz", "H": "cc-pvdz"}, unit="Angstrom", verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-11
    mf.kernel()
    assert mf.converged
    ncas = mf.mo_coeff.shape[1] - N_FROZEN
    nelecas = mol.nelectron - 2 * N_FROZEN
    cas = mcscf.CASCI(mf, ncas, nelecas)
    h1, ecore = cas.get_h1eff()
    eri = cas.get_h2eff()
    fcidump.from_integrals(out, h1, eri, ncas, nelecas, nuc=ecore, tol=1e-12)
    print(f"{out}: {ncas} orbitals, {nelecas} electrons, E_HF = {mf.e_tot:.10f}")


if __name__ == "__main__":
    main()
