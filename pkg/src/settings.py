# Standard library imports
import json
import logging
import os
from typing import Any, Dict, Optional

# Third-party imports
from dotenv import load_dotenv

# Local imports
from src.look_and_feel import warning

load_dotenv()

class Settings:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(Settings, cls).__new__(cls)
            cls._instance._initialize()
        return cls._instance

    def _initialize(self):
        self.project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
        self.output_folder = os.path.join(self.project_root, "output")

        # Helper function to ensure correct path
        def ensure_output_path(path: str) -> str:
            return path if os.path.dirname(path) == self.output_folder else os.path.join(self.output_folder, os.path.basename(path))

        # Matrix kernel settings
        self.max_dimension: int = 64
        self.svd_max_sweeps: int = 30
        self.svd_rotation_tol: float = 1e-14
        self.subspace_tau: float = 1e-8
        self.orthonormal_tol: float = 1e-10
        self.det_eps: float = 1e-13
        self.exp_scale_threshold: float = 0.5
        self.exp_term_cutoff: float = 1e-17
        self.exp_max_terms: int = 60

        # Function evaluation settings
        self.resolvent_eps: float = 1e-12
        self.cauchy_derivative_nodes: int = 64
        self.max_derivative_order: int = 12
        self.taylor_min_nodes: int = 256

        # Grid scan settings
        self.max_grid_points: int = 4_000_000
        self.scan_chunk_size: int = 2048
        self.threads: int = 1
        self.show_progress: bool = False

        # Extremum refinement settings
        self.nelder_mead_max_iter: int = 200
        self.nelder_mead_xatol_factor: float = 1e-6
        self.interior_tie_tol: float = 1e-10

        # Verification settings
        self.constancy_tol: float = 1e-8
        self.direction_tol: float = 1e-6
        self.mean_value_terms: int = 16
        self.mean_value_nodes: int = 256
        self.direction_derivatives: int = 6
        self.factorization_samples: int = 64
        self.seed: int = 0x5EED

        # Spectral settings
        self.spectrum_margin: float = 1e-6
        self.derivative_step: float = 1e-5
        self.laplace_eps: float = 1e-10
        self.gauss_legendre_nodes: int = 16
        self.cauchy_exp_nodes: int = 512

        # Config file path (in output folder)
        self.config_file: str = ensure_output_path("config.json")

        self._apply_environment()

    def _apply_environment(self):
        threads = os.getenv("SVFIELD_THREADS")
        if threads is None or threads.strip() == "":
            return
        try:
            value = int(threads)
            if value < 1:
                raise ValueError(threads)
            self.threads = value
        except ValueError:
            logging.warning(warning(f"Ignoring invalid SVFIELD_THREADS value: {threads!r}"))

    def load_settings(self, config_file: Optional[str] = None):
        path = config_file or self.config_file
        if not os.path.exists(path):
            return
        with open(path, 'r', encoding='utf-8') as f:
            saved_settings = json.load(f)
        for key, value in saved_settings.items():
            if hasattr(self, key) and not key.startswith('_'):
                setattr(self, key, value)
            else:
                logging.warning(warning(f"Unknown setting '{key}' in {path} ignored"))

    def save_settings(self, config_file: Optional[str] = None):
        path = config_file or self.config_file
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.get_all_settings(), f, indent=4)

    def get_all_settings(self) -> Dict[str, Any]:
        return {key: value for key, value in self.__dict__.items() if not key.startswith('_')}

    def update_setting(self, key: str, value: Any):
        if hasattr(self, key) and not key.startswith('_'):
            setattr(self, key, value)
        else:
            raise AttributeError(f"Setting '{key}' does not exist")

    def reset_to_defaults(self):
        self._initialize()

# Singleton instance
settings = Settings()
