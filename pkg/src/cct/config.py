"""Deployment configuration shared by the server and its clients.

One canonical-JSON file describes a deployment: protocol timing, retention,
GPS thresholds, the health-authority verify key, the platform verify key
(for clients checking quotes), and where to reach the service. Both sides
derive the expected enclave measurement from this file, which is what makes
client-side attestation checks meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from cct.contact_log import DEFAULT_RETENTION
from cct.enclave import DEFAULT_GPS_D_MAX, DEFAULT_GPS_TAU, EnclaveConfig
from cct.ident import DEFAULT_DELTA_T, TimeParams
from cct.service import DEFAULT_HOST, DEFAULT_PORT
from cct.wire import canonical_encode, lenient_decode

_KNOWN_FIELDS = {
    "delta_t",
    "gps_d_max",
    "gps_tau",
    "ha_verify_key",
    "host",
    "platform_verify_key",
    "port",
    "retention",
    "store_path",
    "strict_interval_match",
    "t0",
}


@dataclass(frozen=True)
class DeploymentConfig:
    enclave: EnclaveConfig
    host: str = DEFAULT_HOST
    port: int = DEFAULT_PORT
    platform_verify_key: bytes | None = None
    store_path: str | None = None

    @classmethod
    def from_value(cls, value: dict) -> "DeploymentConfig":
        if not isinstance(value, dict):
            raise ValueError("deployment config must be a JSON object")
        unknown = set(value) - _KNOWN_FIELDS
        if unknown:
            raise ValueError(f"unknown config field: {sorted(unknown)[0]}")
        if "ha_verify_key" not in value:
            raise ValueError("missing config field: ha_verify_key")
        enclave = EnclaveConfig(
            ha_verify_key=bytes.fromhex(value["ha_verify_key"]),
            time=TimeParams(
                t0=value.get("t0", 0), delta_t=value.get("delta_t", DEFAULT_DELTA_T)
            ),
            retention=value.get("retention", DEFAULT_RETENTION),
            strict_interval_match=value.get("strict_interval_match", False),
            gps_d_max=value.get("gps_d_max", DEFAULT_GPS_D_MAX),
            gps_tau=value.get("gps_tau", DEFAULT_GPS_TAU),
        )
        platform_hex = value.get("platform_verify_key")
        return cls(
            enclave=enclave,
            host=value.get("host", DEFAULT_HOST),
            port=value.get("port", DEFAULT_PORT),
            platform_verify_key=(
                bytes.fromhex(platform_hex) if platform_hex is not None else None
            ),
            store_path=value.get("store_path"),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "DeploymentConfig":
        return cls.from_value(lenient_decode(Path(path).read_bytes()))

    def to_value(self) -> dict:
        value = {
            "delta_t": self.enclave.time.delta_t,
            "gps_d_max": float(self.enclave.gps_d_max),
            "gps_tau": float(self.enclave.gps_tau),
            "ha_verify_key": self.enclave.ha_verify_key.hex(),
            "host": self.host,
            "port": self.port,
            "retention": self.enclave.retention,
            "strict_interval_match": self.enclave.strict_interval_match,
            "t0": self.enclave.time.t0,
        }
        if self.platform_verify_key is not None:
            value["platform_verify_key"] = self.platform_verify_key.hex()
        if self.store_path is not None:
            value["store_path"] = self.store_path
        return value

    def to_json_bytes(self) -> bytes:
        return canonical_encode(self.to_value())

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_json_bytes())
