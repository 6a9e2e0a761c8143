"""Gray-mapped BPSK/QPSK/16QAM over a complex AWGN channel.

``snr_db`` is always the symbol SNR Es/N0 with unit average symbol energy;
Eb/N0 = Es/N0 - 10 log10(bits per symbol).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc


class Scheme(enum.Enum):
    BPSK = "bpsk"
    QPSK = "qpsk"
    QAM16 = "16qam"

    @classmethod
    def parse(cls, name) -> Scheme:
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        aliases = {"qam16": "16qam", "16-qam": "16qam"}
        return cls(aliases.get(key, key))

    @property
    def bits_per_symbol(self) -> int:
        return _BITS[self]

    @property
    def constellation(self) -> np.ndarray:
        """Symbols indexed by their bit label (MSB first)."""
        return _TABLES[self]


def _pam4(b0: int, b1: int) -> int:
    # Gray PAM-4 per axis: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
    return {(0, 0): -3, (0, 1): -1, (1, 1): 1, (1, 0): 3}[(b0, b1)]


def _build_tables():
    bpsk = np.array([1.0, -1.0], dtype=complex)
    qpsk = np.array([((1 - 2 * (lab >> 1)) + 1j * (1 - 2 * (lab & 1))) / np.sqrt(2) for lab in range(4)])
    qam = np.empty(16, dtype=complex)
    for lab in range(16):
        b = [(lab >> s) & 1 for s in (3, 2, 1, 0)]
        qam[lab] = (_pam4(b[0], b[1]) + 1j * _pam4(b[2], b[3])) / np.sqrt(10)
    return {Scheme.BPSK: bpsk, Scheme.QPSK: qpsk, Scheme.QAM16: qam}


_BITS = {Scheme.BPSK: 1, Scheme.QPSK: 2, Scheme.QAM16: 4}
_TABLES = _build_tables()


@dataclass
class SymbolFrame:
    symbols: np.ndarray
    payload_bits: int
    scheme: Scheme

    def __post_init__(self):
        expected = -(-self.payload_bits // self.scheme.bits_per_symbol)
        if len(self.symbols) != expected:
            raise ValueError(f"{len(self.symbols)} symbols cannot carry {self.payload_bits} bits "
                             f"({expected} expected)")

    @property
    def pad_bits(self) -> int:
        return len(self.symbols) * self.scheme.bits_per_symbol - self.payload_bits


@dataclass
class ChannelConfig:
    snr_db: float
    h: complex = 1 + 0j
    noise_seed: int = 0
    noiseless: bool = False

    @property
    def noise_power(self) -> float:
        if self.noiseless:
            return 0.0
        return abs(self.h) ** 2 * 10 ** (-self.snr_db / 10)


def pack_bits(data: np.ndarray) -> np.ndarray:
    """Bytes to bits, most significant bit first."""
    return np.unpackbits(np.asarray(data, dtype=np.uint8))


def unpack_bits(bits: np.ndarray, byte_count: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    if len(bits) < 8 * byte_count:
        raise ValueError(f"{len(bits)} bits cannot fill {byte_count} bytes")
    return np.packbits(bits[:8 * byte_count])


def modulate(bits: np.ndarray, scheme) -> SymbolFrame:
    scheme = Scheme.parse(scheme)
    bits = np.asarray(bits, dtype=np.uint8)
    k = scheme.bits_per_symbol
    n_sym = -(-len(bits) // k)
    padded = np.zeros(n_sym * k, dtype=np.int64)
    padded[:len(bits)] = bits
    weights = 1 << np.arange(k - 1, -1, -1)
    labels = padded.reshape(n_sym, k) @ weights
    return SymbolFrame(scheme.constellation[labels], len(bits), scheme)


def transmit_awgn(frame: SymbolFrame, channel: ChannelConfig) -> SymbolFrame:
    """``y = h * s + n`` with circular Gaussian ``n`` of variance ``noise_power``."""
    y = channel.h * frame.symbols
    sigma2 = channel.noise_power
    if sigma2 > 0:
        rng = np.random.default_rng(channel.noise_seed)
        n = len(y)
        noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        y = y + np.sqrt(sigma2 / 2) * noise
    elif not channel.noiseless:
        raise ValueError("noise power must be positive unless the channel is noiseless")
    return SymbolFrame(y, frame.payload_bits, frame.scheme)


def _decide(y: np.ndarray, table: np.ndarray, chunk: int = 1 << 16) -> np.ndarray:
    labels = np.empty(len(y), dtype=np.int64)
    for start in range(0, len(y), chunk):
        seg = y[start:start + chunk, None]
        labels[start:start + chunk] = np.argmin(np.abs(seg - table[None, :]) ** 2, axis=1)
    return labels


def demodulate(frame: SymbolFrame, channel: ChannelConfig | None = None) -> np.ndarray:
    """Coherent minimum-distance hard decisions; pad bits are stripped."""
    h = channel.h if channel is not None else 1.0
    if h == 0:
        raise ValueError("channel coefficient must be non-zero for coherent detection")
    scheme = frame.scheme
    labels = _decide(frame.symbols / h, scheme.constellation)
    k = scheme.bits_per_symbol
    shifts = np.arange(k - 1, -1, -1)
    bits = ((labels[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)
    return bits[:frame.payload_bits]


def ebn0_db(scheme, snr_db: float) -> float:
    return snr_db - 10 * np.log10(Scheme.parse(scheme).bits_per_symbol)


def _q(x):
    return 0.5 * erfc(np.asarray(x) / np.sqrt(2))


def theoretical_ber(scheme, snr_db: float, approximate: bool = False) -> float:
    """Closed-form BER at symbol SNR ``snr_db`` (Es/N0).

    BPSK/QPSK: Q(sqrt(2 Eb/N0)). 16QAM: the exact Gray per-axis expression
    (3Q(d) + 2Q(3d) - Q(5d))/4 with d = sqrt(Es/(5 N0)); ``approximate=True``
    gives the nearest-neighbour form (3/8) erfc(sqrt(2 Eb/(5 N0))).
    """
    scheme = Scheme.parse(scheme)
    if np.isinf(snr_db) and snr_db > 0:
        return 0.0
    ebn0 = 10 ** (ebn0_db(scheme, snr_db) / 10)
    if scheme in (Scheme.BPSK, Scheme.QPSK):
        return float(_q(np.sqrt(2 * ebn0)))
    if approximate:
        return float(3 / 8 * erfc(np.sqrt(2 * ebn0 / 5)))
    d = np.sqrt(10 ** (snr_db / 10) / 5)
    return float((3 * _q(d) + 2 * _q(3 * d) - _q(5 * d)) / 4)


def measured_ber(scheme, snr_db: float, bit_count: int, seed: int = 0) -> float:
    """Monte Carlo BER over ``bit_count`` random bits; deterministic in ``seed``."""
    scheme = Scheme.parse(scheme)
    bit_rng, noise_seq = np.random.SeedSequence(seed).spawn(2)
    bits = np.random.default_rng(bit_rng).integers(0, 2, bit_count, dtype=np.uint8)
    channel = ChannelConfig(snr_db, noise_seed=int(noise_seq.generate_state(1)[0]))
    received = demodulate(transmit_awgn(modulate(bits, scheme), channel), channel)
    return float(np.count_nonzero(received != bits)) / bit_count if bit_count else 0.0
