import numbers
from typing import Any, Dict, List

EXPERIMENT_FIELDS = {
    "dataset": str,
    "synthetic": dict,
    "methods": list,
    "densities": list,
    "repetitions": int,
    "base_seed": int,
    "method_params": dict,
    "tune": bool,
    "search_space": dict,
    "tuning_trials": int,
    "tuning_density": numbers.Real,
    "validation_fraction": numbers.Real,
    "output_dir": str,
    "workers": int,
    "resume": bool,
    "record_wall_time": bool,
}

SYNTHETIC_FIELDS = {
    "n_nodes": int,
    "n_times": int,
    "area_side": numbers.Real,
    "knn_k": int,
    "energy": numbers.Real,
    "low_freq_count": int,
    "noise_scale": numbers.Real,
    "seed": int,
}


def _result(errors: List[str], warnings: List[str]) -> Dict[str, Any]:
    return {
        'is_valid': len(errors) == 0,
        'errors': errors,
        'warnings': warnings
    }


def _type_errors(data: Dict[str, Any], schema: Dict[str, type], prefix: str = "") -> List[str]:
    errors = []
    for key, value in data.items():
        if key not in schema:
            errors.append(f"{prefix}{key}: unknown field")
            continue
        expected = schema[key]
        # bool is an int subclass; only accept it where a bool is asked for
        if isinstance(value, bool) and expected is not bool:
            errors.append(f"{prefix}{key}: expected {expected.__name__}, got bool")
        elif not isinstance(value, expected):
            errors.append(f"{prefix}{key}: expected {expected.__name__}, got {type(value).__name__}")
    return errors


class ConfigValidator:
    """Dictionary-level checks run before config dataclasses are built"""

    @staticmethod
    def validate_experiment(data: Dict[str, Any]) -> Dict[str, Any]:
        """Validate an experiment config loaded from JSON"""
        from models.methods import METHODS

        if not isinstance(data, dict):
            return _result(["config: expected a JSON object"], [])

        errors = _type_errors(data, EXPERIMENT_FIELDS)
        warnings = []
        if errors:
            return _result(errors, warnings)

        # Methods
        methods = data.get("methods", [])
        if "methods" in data and not methods:
            errors.append("methods: at least one method is required")
        for method in methods:
            if method not in METHODS:
                errors.append(f"methods: unknown method {method!r}; expected one of {', '.join(METHODS)}")
        if len(set(methods)) != len(methods):
            errors.append("methods: duplicate entries")

        # Densities
        densities = data.get("densities", [])
        if "densities" in data and not densities:
            errors.append("densities: at least one density is required")
        for density in densities:
            if isinstance(density, bool) or not isinstance(density, numbers.Real):
                errors.append(f"densities: {density!r} is not a number")
            elif not 0.0 < density <= 1.0:
                errors.append(f"densities: {density} is outside (0, 1]")
        if len(set(densities)) != len(densities):
            errors.append("densities: duplicate entries")

        # Counts
        if data.get("repetitions", 1) < 1:
            errors.append("repetitions: must be at least 1")
        elif data.get("repetitions", 50) < 5:
            warnings.append("repetitions: fewer than 5 repetitions gives noisy averages")
        if data.get("base_seed", 0) < 0:
            errors.append("base_seed: must be nonnegative")
        if data.get("workers", 1) < 1:
            errors.append("workers: must be at least 1")
        if data.get("tuning_trials", 1) < 1:
            errors.append("tuning_trials: must be at least 1")
        if not 0.0 < data.get("validation_fraction", 0.2) < 1.0:
            errors.append("validation_fraction: must lie in (0, 1)")
        if "tuning_density" in data and not 0.0 < data["tuning_density"] <= 1.0:
            errors.append("tuning_density: must lie in (0, 1]")

        # Per-method sections
        for section in ("method_params", "search_space"):
            for method, params in data.get(section, {}).items():
                if method not in METHODS:
                    errors.append(f"{section}: unknown method {method!r}")
                elif not isinstance(params, dict):
                    errors.append(f"{section}.{method}: expected an object")
                elif section == "method_params":
                    errors.extend(ConfigValidator.validate_method_params(method, params)['errors'])

        if "synthetic" in data:
            if data.get("dataset", "synthetic") != "synthetic":
                warnings.append("synthetic: ignored because dataset is not 'synthetic'")
            errors.extend(ConfigValidator.validate_synthetic(data["synthetic"])['errors'])

        return _result(errors, warnings)

    @staticmethod
    def validate_synthetic(data: Dict[str, Any]) -> Dict[str, Any]:
        """Validate synthetic dataset parameters"""
        errors = _type_errors(data, SYNTHETIC_FIELDS, prefix="synthetic.")
        warnings = []
        if errors:
            return _result(errors, warnings)

        for key in ("n_nodes", "n_times", "knn_k", "low_freq_count"):
            if key in data and data[key] < 1:
                errors.append(f"synthetic.{key}: must be positive")
        for key in ("area_side", "energy"):
            if key in data and not data[key] > 0:
                errors.append(f"synthetic.{key}: must be positive")
        if data.get("noise_scale", 1.0) < 0:
            errors.append("synthetic.noise_scale: must be nonnegative")
        if data.get("n_nodes", 100) > 1000:
            warnings.append("synthetic.n_nodes: dense eigendecomposition above 1000 nodes is slow")

        return _result(errors, warnings)

    @staticmethod
    def validate_method_params(method: str, params: Dict[str, Any]) -> Dict[str, Any]:
        """Validate the fixed hyperparameters of one method"""
        from models.methods import MODEL_KEYS, SOLVER_KEYS, TRAIN_KEYS

        allowed = {
            "timegnn": MODEL_KEYS + TRAIN_KEYS,
            "gcn": tuple(k for k in MODEL_KEYS if k != "alpha") + TRAIN_KEYS,
            "tgsr": SOLVER_KEYS,
            "graphtrss": SOLVER_KEYS,
            "mean": (),
        }.get(method)
        if allowed is None:
            return _result([f"method: unknown method {method!r}"], [])

        errors = [f"method_params.{method}.{key}: unknown parameter"
                  for key in sorted(set(params) - set(allowed))]
        warnings = []
        for key in ("upsilon", "learning_rate", "cg_tol"):
            value = params.get(key)
            if value is not None and not (isinstance(value, numbers.Real) and value > 0):
                errors.append(f"method_params.{method}.{key}: must be a positive number")
        for key in ("epochs", "n_layers", "hidden", "alpha", "cg_max_iter"):
            value = params.get(key)
            if value is not None and (isinstance(value, bool) or not isinstance(value, int) or value < 1):
                errors.append(f"method_params.{method}.{key}: must be a positive integer")
        if method == "tgsr" and params.get("epsilon", 0.0) != 0.0:
            errors.append("method_params.tgsr.epsilon: tgsr has no Sobolev shift; use graphtrss")
        if params.get("epochs", 0) > 20000:
            warnings.append(f"method_params.{method}.epochs: very long training run")

        return _result(errors, warnings)
