import numpy as np
import pytest

from cocoacl.linalg import RngStream
from cocoacl.tasks import TaskSequenceSpec, generate_parameters, generate_task_data, sample_test_point


class TestSpec:
    def test_uniform(self):
        s = TaskSequenceSpec.uniform(10, 4, 6, 0.1, 3)
        assert s.T == 3 and s.n == (6, 6, 6) and s.sigma2 == (0.1,) * 3

    @pytest.mark.parametrize("kw", [
        dict(p=4, p_shared=5, n=(2,), sigma2=(0.0,)),
        dict(p=4, p_shared=0, n=(0,), sigma2=(0.0,)),
        dict(p=4, p_shared=0, n=(2, 2), sigma2=(0.0,)),
        dict(p=4, p_shared=0, n=(2,), sigma2=(-1.0,)),
        dict(p=4, p_shared=0, n=(2,), sigma2=(0.0,), regressor_model="toeplitz", eps=1.2),
        dict(p=4, p_shared=0, n=(2,), sigma2=(0.0,), param_model="other"),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            TaskSequenceSpec(**kw)


class TestParameters:
    def test_normalized_energy_split(self):
        s = TaskSequenceSpec.uniform(20, 15, 4, 0.0, 3)
        ws = generate_parameters(s, RngStream(1))
        for w in ws:
            assert np.sum(w[:15] ** 2) == pytest.approx(0.75)
            assert np.sum(w[15:] ** 2) == pytest.approx(0.25)
            assert np.array_equal(w[:15], ws[0][:15])
        assert not np.array_equal(ws[0][15:], ws[1][15:])

    def test_fully_shared(self):
        ws = generate_parameters(TaskSequenceSpec.uniform(8, 8, 4, 0.0, 3), RngStream(2))
        assert all(np.array_equal(w, ws[0]) for w in ws)
        assert np.sum(ws[0] ** 2) == pytest.approx(1.0)

    def test_random_energy_moment(self):
        s = TaskSequenceSpec.uniform(16, 8, 4, 0.0, 2, param_model="random_energy", energy=3.0)
        gen = RngStream(3).generator()
        norms = [np.sum(generate_parameters(s, gen)[1] ** 2) for _ in range(4000)]
        assert np.mean(norms) == pytest.approx(3.0, rel=0.03)


class TestData:
    def test_shapes_and_noise(self):
        s = TaskSequenceSpec(p=5, p_shared=2, n=(300_00, 7), sigma2=(0.25, 0.0))
        ws = generate_parameters(s, RngStream(4))
        data = generate_task_data(s, ws, RngStream(5))
        assert data[0].A.shape == (30000, 5) and data[1].y.shape == (7,)
        resid = data[0].y - data[0].A @ ws[0]
        assert np.var(resid) == pytest.approx(0.25, rel=0.03)
        np.testing.assert_allclose(data[1].y, data[1].A @ ws[1], atol=1e-12)

    def test_test_point(self):
        a, y = sample_test_point(np.ones(3), 0.0, RngStream(6).generator(), size=10)
        assert a.shape == (10, 3)
        np.testing.assert_allclose(y, a.sum(axis=1))
