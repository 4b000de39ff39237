"""System configuration: every scalar knob of the scheme, with validation,
derived quantities, JSON round-tripping and dotted-key overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .codec import PolarCodeSpec


@dataclass
class PolarConfig:
    block_len: int = 512
    crc_len: int = 16
    list_size: int = 16
    genie: bool = False


@dataclass
class AmpParams:
    """Knobs of the AMP sparse-recovery decoder.

    ``denoiser`` options: ``"soft"`` (scalar soft threshold), ``"bg"``
    (Bernoulli-Gaussian posterior mean, matched to Rayleigh gains), ``"pm"``
    (Bernoulli point mass at the known coefficient, matched to unit gains),
    or ``"auto"`` to pick pm/bg from the configured fading mode.
    """

    num_iters: int = 30
    threshold_scale: float = 1.6   # soft-threshold multiplier on the noise level
    activity_scale: float = 3.0    # activity gate, multiples of the coefficient SE
    denoiser: str = "auto"
    stop_tol: float = 1e-4         # early stop on relative residual change
    ls_refine: bool = True         # least-squares debias on the detected support


@dataclass
class SystemConfig:
    # message split
    preamble_bits: int = 11
    data_bits: int = 89
    # preamble OTFS grid (delay x Doppler), n_preamble = product
    preamble_delay_bins: int = 40
    preamble_doppler_bins: int = 16
    # data OTFS grid
    data_delay_bins: int = 115
    data_doppler_bins: int = 128
    # channel spread (delay bins 0..max_delay; Doppler bins -max_doppler+1..max_doppler)
    max_delay: int = 3
    max_doppler: int = 2
    paths_per_user: int | tuple[int, ...] = 1
    fading: str = "unit"           # "unit" or "rayleigh"
    # energy
    ebn0_preamble_db: float = 4.0
    ebn0_data_db: float = 4.0
    noise_var: float = 1.0
    # receiver switches
    ideal_phase1: bool = False
    run_data_phase: bool = True
    sic_enabled: bool = True
    polar: PolarConfig = field(default_factory=PolarConfig)
    amp: AmpParams = field(default_factory=AmpParams)
    # simulation
    num_users: int = 50
    num_trials: int = 100
    master_seed: int = 0
    sensing_seed: int = 1234

    def __post_init__(self):
        self.validate()

    # -- derived quantities ------------------------------------------------

    @property
    def n_preamble(self) -> int:
        return self.preamble_delay_bins * self.preamble_doppler_bins

    @property
    def n_data(self) -> int:
        return self.data_delay_bins * self.data_doppler_bins

    @property
    def frame_len(self) -> int:
        return self.n_preamble + self.n_data + 2 * self.max_delay

    @property
    def doppler_rescale(self) -> int:
        """Doppler bin stretch between the two phases (integer by design)."""
        return self.n_data // self.n_preamble

    @property
    def data_symbols(self) -> int:
        """Occupied data slots per user: one QPSK symbol per two code bits."""
        return self.polar.block_len // 2

    @property
    def power_preamble(self) -> float:
        """Per-sample preamble power from the preamble-phase Eb/N0."""
        ebn0 = 10 ** (self.ebn0_preamble_db / 10)
        return ebn0 * self.noise_var * self.preamble_bits / self.n_preamble

    @property
    def power_data(self) -> float:
        """Per-occupied-slot data symbol power from the data-phase Eb/N0."""
        ebn0 = 10 ** (self.ebn0_data_db / 10)
        return ebn0 * self.noise_var * self.data_bits / self.data_symbols

    @property
    def total_bits(self) -> int:
        return self.preamble_bits + self.data_bits

    def polar_spec(self) -> PolarCodeSpec:
        return PolarCodeSpec.create(
            block_len=self.polar.block_len,
            info_len=self.data_bits + self.polar.crc_len,
            crc_len=self.polar.crc_len,
            list_size=self.polar.list_size,
            genie=self.polar.genie,
        )

    def paths_choices(self) -> tuple[int, ...]:
        p = self.paths_per_user
        return (p,) if isinstance(p, int) else tuple(int(v) for v in p)

    # -- validation ----------------------------------------------------------

    def validate(self):
        if isinstance(self.polar, dict):
            self.polar = PolarConfig(**self.polar)
        if isinstance(self.amp, dict):
            self.amp = AmpParams(**self.amp)
        if isinstance(self.paths_per_user, list):
            self.paths_per_user = tuple(self.paths_per_user)

        if not 1 <= self.preamble_bits < self.data_bits:
            raise ValueError("need 1 <= preamble_bits < data_bits")
        if self.n_data % self.n_preamble:
            raise ValueError(
                "data grid size must be an integer multiple of the preamble "
                f"grid size (got {self.n_data}/{self.n_preamble})"
            )
        if not 0 <= self.max_delay < min(self.preamble_delay_bins, self.data_delay_bins):
            raise ValueError("max_delay must fit inside both delay axes")
        if 2 * self.max_doppler > min(self.preamble_doppler_bins, self.data_doppler_bins):
            raise ValueError("Doppler spread exceeds the grid")
        if self.fading not in ("unit", "rayleigh"):
            raise ValueError(f"unknown fading mode {self.fading!r}")
        if self.noise_var < 0:
            raise ValueError("noise_var must be >= 0")
        if min(self.paths_choices()) < 1:
            raise ValueError("paths_per_user must be >= 1")
        if self.polar.block_len // 2 > self.n_data:
            raise ValueError("data symbols do not fit on the data grid")
        if self.num_users < 1:
            raise ValueError("num_users must be >= 1")
        # raises if the polar geometry is inconsistent
        self.polar_spec()

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if isinstance(d["paths_per_user"], tuple):
            d["paths_per_user"] = list(d["paths_per_user"])
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "SystemConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_file(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def replace(self, **kwargs) -> "SystemConfig":
        return dataclasses.replace(self, **kwargs)

    def with_overrides(self, overrides: list[str]) -> "SystemConfig":
        """Apply ``dotted.key=value`` overrides (values parsed as JSON when
        possible, else taken as strings)."""
        data = self.to_dict()
        for item in overrides:
            key, _, raw = item.partition("=")
            if not _:
                raise ValueError(f"override {item!r} is not of the form key=value")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            node = data
            parts = key.split(".")
            for p in parts[:-1]:
                if p not in node or not isinstance(node[p], dict):
                    raise ValueError(f"unknown config group {p!r} in {key!r}")
                node = node[p]
            if parts[-1] not in node:
                raise ValueError(f"unknown config key {key!r}")
            node[parts[-1]] = value
        return SystemConfig.from_dict(data)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]
