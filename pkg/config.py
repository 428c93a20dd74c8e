try:
    # Pydantic v2
    from pydantic_settings import BaseSettings, SettingsConfigDict
    from pydantic import field_validator, model_validator
    PYDANTIC_V2 = True
except ImportError:
    # Fallback a pydantic v1
    from pydantic import BaseSettings
    from pydantic import validator as field_validator, root_validator as model_validator
    SettingsConfigDict = None
    PYDANTIC_V2 = False

from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import dotenv_values


class Settings(BaseSettings):
    """Configurazione globale degli studi SUC (ExperimentConfig)"""

    if PYDANTIC_V2:
        model_config = SettingsConfigDict(
            env_file='.env',
            env_file_encoding='utf-8',
            case_sensitive=False,
            extra='ignore'
        )
    else:
        # Pydantic v1 compatibility
        class Config:
            env_file = '.env'
            env_file_encoding = 'utf-8'
            case_sensitive = False

    # System files
    bus_file: str = "data/six_bus/buses.csv"
    unit_file: str = "data/six_bus/units.csv"
    line_file: str = "data/six_bus/lines.csv"
    farm_file: str = "data/six_bus/farms.csv"
    slack_bus: Optional[int] = None  # None -> bus con id minimo

    # Serie storiche (generate da gen-data)
    load_file: str = "output/loads.csv"
    wind_file: str = "output/wind.csv"

    # Orizzonte
    horizon: int = 24
    n_h: int = 4  # blocco intra-day
    n_days: int = 31
    warmup_days: int = 5

    # Forecast
    m: int = 1
    phi_fraction: float = 0.2  # phi = phi_fraction * mu
    intraday_window: int = 100

    # Policy e SAA
    policies: str = "deterministic,empirical,data_driven"
    scenarios: int = 50  # S
    eval_scenarios: int = 1000  # S_e
    method: str = "lshaped"  # extensive | lshaped
    multicut: bool = False

    # OPSEL
    workers: int = 4  # L
    budget: int = 1000  # T
    delta_t: int = 200
    classic_ocba: bool = False
    scatter_day: int = 1

    seed: int = 2006

    # Prezzi ($/MWh)
    c_ens: float = 3500.0
    c_wc: float = 50.0

    # Tolleranze solver
    milp_gap: float = 1e-6
    lshaped_tol: float = 1e-6
    lshaped_max_iter: int = 200
    milp_node_limit: int = 100000
    debug_cuts: bool = False
    lp_dump_dir: Optional[str] = None

    # Performance
    max_parallel: int = 1  # processi per ricerca/valutazione

    # Dati sintetici
    target_penetration: float = 0.378
    load_mean_mw: float = 180.0
    load_swing_mw: float = 50.0

    # Calibrazione S_e
    calibration_sizes: str = "100,500,1000,5000"
    calibration_reference: int = 100000
    calibration_days: int = 10

    # Output
    output_dir: str = "output"

    # Logging
    log_level: str = "INFO"
    log_format: str = "text"  # json or text
    log_file: Optional[str] = None

    @field_validator("n_h")
    def _n_h_divides_day(cls, v):
        if v < 1 or 24 % v != 0:
            raise ValueError(f"n_h must divide 24, got {v}")
        return v

    @field_validator("target_penetration")
    def _penetration_range(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError(f"target_penetration must lie in (0,1), got {v}")
        return v

    @field_validator("c_ens", "c_wc")
    def _prices_nonnegative(cls, v):
        if v < 0:
            raise ValueError("prices must be nonnegative")
        return v

    @field_validator("workers", "delta_t", "scenarios", "m", "horizon")
    def _positive(cls, v):
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("budget")
    def _budget_nonnegative(cls, v):
        if v < 0:
            raise ValueError("budget must be >= 0")
        return v

    @field_validator("method")
    def _known_method(cls, v):
        if v not in ("extensive", "lshaped"):
            raise ValueError(f"unknown method {v!r}")
        return v

    if PYDANTIC_V2:
        @model_validator(mode="after")
        def _eval_covers_search(self):
            if self.eval_scenarios < self.scenarios:
                raise ValueError("eval_scenarios (S_e) must be >= scenarios (S)")
            return self

    @property
    def policy_list(self) -> List[str]:
        """Parse policies from string"""
        return [p.strip() for p in self.policies.split(',') if p.strip()]

    @property
    def calibration_size_list(self) -> List[int]:
        return [int(s) for s in self.calibration_sizes.split(',') if s.strip()]

    def system_files(self) -> List[str]:
        return [self.bus_file, self.unit_file, self.line_file, self.farm_file]

    def validate_files(self, include_series: bool = True) -> None:
        """Verifica che tutti i file referenziati esistano"""
        from core.errors import ConfigError

        paths = self.system_files()
        if include_series:
            paths += [self.load_file, self.wind_file]
        missing = [p for p in paths if not Path(p).exists()]
        if missing:
            raise ConfigError(f"missing input files: {', '.join(missing)}")

    def echo(self) -> Dict[str, Any]:
        """Tutte le chiavi risolte, per la provenance nel report"""
        return self.model_dump() if PYDANTIC_V2 else self.dict()


def load_config(path: Optional[str] = None, **overrides: Any) -> Settings:
    """
    Carica un file di configurazione chiave=valore.

    Args:
        path: File di configurazione (formato .env, commenti con #)
        overrides: Valori da riga di comando (None viene ignorato)

    Returns:
        Settings: Configurazione validata
    """
    values: Dict[str, Any] = {}
    if path is not None:
        from core.errors import ConfigError

        if not Path(path).exists():
            raise ConfigError(f"config file not found: {path}")
        values.update({
            k.lower(): v for k, v in dotenv_values(path).items() if v is not None
        })
    values.update({k: v for k, v in overrides.items() if v is not None})
    return Settings(**values)


# Istanza globale delle settings
settings = Settings()
