import math

import numpy as np
import pytest

from core.composite import (MoleculeParams, closed_form_offset, effective_couplings,
                            nonrigid_effective_potential, rigid_effective_potential,
                            to_system_params, total_gradient, total_potential)
from core.errors import DomainError
from core.model import potential, validate_params


@pytest.fixture
def molecule():
    return MoleculeParams(m=1.0, omega=1.0, Omega=10.0, a=1.0, L=0.5)


class TestMinima:

    def test_gradient_vanishes(self, molecule):
        eq = nonrigid_effective_potential(molecule)
        for sx in (1.0, -1.0):
            for sy in (1.0, -1.0):
                gx, gy = total_gradient(molecule, sx * eq.x0, sy * eq.y0)
                assert abs(gx) < 1e-9 and abs(gy) < 1e-9

    def test_offset_closed_form(self, molecule):
        eq = nonrigid_effective_potential(molecule)
        assert eq.C == pytest.approx(closed_form_offset(molecule), rel=1e-10)

    def test_minima_are_lowest_nearby(self, molecule):
        eq = nonrigid_effective_potential(molecule)
        xs = eq.x0 + np.linspace(-0.05, 0.05, 11)
        ys = eq.y0 + np.linspace(-0.05, 0.05, 11)
        xx, yy = np.meshgrid(xs, ys)
        assert np.min(total_potential(molecule, xx, yy)) >= eq.C - 1e-14

    def test_stiff_bond_approaches_rigid_rod(self):
        y0_rigid, offset_rigid = rigid_effective_potential(1.0, 1.0, 1.0, 0.5)
        gaps = []
        for big in (10.0, 20.0):
            eq = nonrigid_effective_potential(MoleculeParams(m=1.0, omega=1.0, Omega=big, a=1.0, L=0.5))
            gaps.append(abs(eq.y0 - y0_rigid))
            assert eq.C == pytest.approx(offset_rigid, rel=2.0 / big ** 2)
        assert gaps[0] / gaps[1] == pytest.approx(4.0, rel=0.05)


class TestMapping:

    def test_round_trip(self, molecule):
        eq = nonrigid_effective_potential(molecule)
        system = to_system_params(eq)
        assert system == eq.system
        assert validate_params(system).four_well

    def test_mapped_minima(self, molecule):
        eq = nonrigid_effective_potential(molecule)
        assert potential(eq.system, 1.0, 1.0) == 0.0
        direct = total_potential(molecule, 0.0, 0.0) - eq.C
        assert potential(eq.system, 0.0, 0.0) == pytest.approx(direct, rel=1e-10)

    def test_unequal_couplings_flagged(self, molecule, caplog):
        mu, nu, equal = effective_couplings(nonrigid_effective_potential(molecule).system)
        assert not equal
        assert mu != pytest.approx(nu)
        assert 'equal-parameter results do not apply' in caplog.text

    def test_hbar_scales_everything(self, molecule):
        eq = nonrigid_effective_potential(molecule)
        halved = to_system_params(eq, hbar=0.5)
        assert halved.a_p == pytest.approx(2.0 * eq.system.a_p)
        assert halved.c == pytest.approx(2.0 * eq.system.c)
        assert halved.mu == pytest.approx(eq.system.mu)


class TestDomain:

    def test_soft_bond_has_no_relative_well(self):
        with pytest.raises(DomainError) as err:
            nonrigid_effective_potential(MoleculeParams(m=1.0, omega=1.0, Omega=1.0, a=1.0, L=0.5))
        assert err.value.conditions == ['x0_squared']

    def test_long_bond_has_no_barrier(self):
        with pytest.raises(DomainError) as err:
            nonrigid_effective_potential(MoleculeParams(m=1.0, omega=1.0, Omega=10.0, a=1.0, L=1.2))
        assert err.value.conditions == ['y0_squared']

    def test_rigid_limit(self):
        y0, offset = rigid_effective_potential(1.0, 1.0, 1.0, 0.5)
        assert y0 == pytest.approx(math.sqrt(1.0 - 0.1875))
        assert offset == pytest.approx(0.25 / 8.0 * (1.0 - 0.125))
        with pytest.raises(DomainError):
            rigid_effective_potential(1.0, 1.0, 1.0, 1.2)

    def test_parameters_positive(self):
        with pytest.raises(DomainError):
            MoleculeParams(m=1.0, omega=1.0, Omega=10.0, a=-1.0, L=0.5)

    def test_from_dict(self, molecule):
        assert MoleculeParams.from_dict(molecule.to_dict()) == molecule
        with pytest.raises(DomainError) as err:
            MoleculeParams.from_dict({'m': 1.0, 'omega': 1.0, 'Omega': 10.0, 'a': 1.0})
        assert err.value.conditions == ['L']
        assert molecule.rigid_bond_limit == pytest.approx(2.0 / math.sqrt(3.0))
