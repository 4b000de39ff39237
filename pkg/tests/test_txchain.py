import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from otfsura import codec, txchain
from otfsura.config import SystemConfig


@pytest.fixture(scope="module")
def paper_cfg():
    return SystemConfig()


@pytest.fixture(scope="module")
def sensing(paper_cfg):
    return txchain.build_sensing_matrix(
        paper_cfg.preamble_bits, paper_cfg.n_preamble, seed=paper_cfg.sensing_seed
    )


class TestSensingMatrix:
    def test_shape_paper_config(self, sensing):
        assert sensing.columns.shape == (640, 2048)

    def test_column_energy_statistics(self, sensing):
        energies = np.sum(np.abs(sensing.columns) ** 2, axis=0)
        assert abs(energies.mean() - 1.0) < 0.02

    def test_regeneration_identical(self, sensing):
        again = txchain.build_sensing_matrix(11, 640, seed=sensing.seed)
        assert_array_equal(again.columns, sensing.columns)

    def test_serialisation_round_trip(self, sensing, tmp_path):
        path = tmp_path / "codebook.bin"
        txchain.save_sensing_matrix(sensing, path)
        loaded = txchain.load_sensing_matrix(path)
        assert loaded.n_bits == sensing.n_bits
        assert loaded.seed == sensing.seed
        assert_array_equal(loaded.columns, sensing.columns)

    def test_file_layout(self, tmp_path):
        small = txchain.build_sensing_matrix(2, 4, seed=1)
        path = tmp_path / "small.bin"
        txchain.save_sensing_matrix(small, path)
        raw = path.read_bytes()
        header = np.frombuffer(raw[:24], dtype="<u8")
        assert_array_equal(header, [2, 4, 1])
        body = np.frombuffer(raw[24:], dtype="<f8").reshape(4, 4, 2)
        assert_allclose(body[..., 0] + 1j * body[..., 1], small.columns)


class TestTransmit:
    def test_frame_length_paper_config(self, paper_cfg, sensing):
        rng = np.random.default_rng(0)
        bits = rng.integers(0, 2, size=100).astype(np.uint8)
        frame = txchain.transmit(bits, sensing, paper_cfg)
        assert frame.phase1.size == 640 + 3
        assert frame.phase2.size == 14720 + 3
        assert frame.frame.size == 640 + 14720 + 2 * 3 == 15366

    def test_preamble_indexing_zero_message(self, paper_cfg, sensing):
        bits = np.zeros(100, dtype=np.uint8)
        frame = txchain.transmit(bits, sensing, paper_cfg)
        from otfsura.zak import add_cp, idzt

        grid = sensing.columns[:, 0].reshape(40, 16, order="F")
        expected = add_cp(idzt(grid), 3) * np.sqrt(
            paper_cfg.power_preamble * paper_cfg.n_preamble
        )
        assert_allclose(frame.phase1, expected)

    def test_preamble_indexing_bijective_sample(self, paper_cfg, sensing):
        rng = np.random.default_rng(1)
        seen = set()
        for _ in range(64):
            pre = rng.integers(0, 2, size=11).astype(np.uint8)
            seen.add(codec.bits_to_int(pre))
        # distinct bit patterns map to distinct indices
        assert len(seen) > 50
        assert all(0 <= i < 2048 for i in seen)

    def test_energy_audit(self, paper_cfg, sensing):
        rng = np.random.default_rng(2)
        bits = rng.integers(0, 2, size=100).astype(np.uint8)
        frame = txchain.transmit(bits, sensing, paper_cfg)
        cp = paper_cfg.max_delay
        index = codec.bits_to_int(bits[:11])
        col_energy = np.sum(np.abs(sensing.columns[:, index]) ** 2)
        e_phase1 = np.sum(np.abs(frame.phase1[cp:]) ** 2)
        e_phase2 = np.sum(np.abs(frame.phase2[cp:]) ** 2)
        expected1 = paper_cfg.power_preamble * paper_cfg.n_preamble * col_energy
        expected2 = 256 * paper_cfg.power_data
        assert abs(e_phase1 - expected1) < 1e-9 * expected1
        assert abs(e_phase2 - expected2) < 1e-9 * expected2

    def test_determinism(self, paper_cfg, sensing):
        rng = np.random.default_rng(3)
        bits = rng.integers(0, 2, size=100).astype(np.uint8)
        a = txchain.transmit(bits, sensing, paper_cfg)
        b = txchain.transmit(bits, sensing, paper_cfg)
        assert_array_equal(a.frame, b.frame)

    def test_wrong_message_length(self, paper_cfg, sensing):
        with pytest.raises(ValueError):
            txchain.transmit(np.zeros(99, dtype=np.uint8), sensing, paper_cfg)

    def test_mismatched_sensing(self, paper_cfg):
        other = txchain.build_sensing_matrix(6, 64, seed=0)
        with pytest.raises(ValueError):
            txchain.transmit(np.zeros(100, dtype=np.uint8), other, paper_cfg)

    def test_per_phase_ebn0_exact(self, paper_cfg):
        # Eb/N0 identities the power derivation must satisfy
        ebn0_p = (
            paper_cfg.n_preamble
            * paper_cfg.power_preamble
            / (paper_cfg.noise_var * paper_cfg.preamble_bits)
        )
        ebn0_d = (
            paper_cfg.data_symbols
            * paper_cfg.power_data
            / (paper_cfg.noise_var * paper_cfg.data_bits)
        )
        assert_allclose(10 * np.log10(ebn0_p), paper_cfg.ebn0_preamble_db)
        assert_allclose(10 * np.log10(ebn0_d), paper_cfg.ebn0_data_db)


class TestDataGrid:
    def test_occupied_cells_and_amplitude(self, paper_cfg):
        rng = np.random.default_rng(4)
        data = rng.integers(0, 2, size=89).astype(np.uint8)
        grid = txchain.data_grid(data, preamble_index=17, config=paper_cfg)
        flat = grid.reshape(-1, order="F")
        occupied = np.flatnonzero(flat)
        slots, _ = codec.occupied_slots(17, paper_cfg.n_data, 256)
        assert_array_equal(occupied, slots)
        assert_allclose(np.abs(flat[occupied]), np.sqrt(paper_cfg.power_data))
