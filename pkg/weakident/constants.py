# Defaults for each problem kind. "pde" covers 1D and 2D spatial data,
# "ode" covers systems without spatial axes.
defaults = {
    "pde": {
        "alpha_cap": 6,
        "beta_cap": 6,
        "subsample": (50,),
        "hist_bins": 200,
    },
    "ode": {
        "alpha_cap": 0,
        "beta_cap": 5,
        "subsample": (1000,),
        "hist_bins": 100,
    },
    "common": {
        "dictionary_rule": "per_axis",
        "tau_hat": 2.0,
        "tau_decay": 1e-10,
        "p_max": 60,
        "trim_threshold": 0.05,
        "max_sparsity": 10,
        "cv_lambda": 0.01,
        "cv_trials": 30,
        "seed": 0,
        "adaptive_subsample": True,
        "min_region_rows": 800,
        "max_subsample_retries": 3,
        "subsample_increment": 20,
    },
}

# Per-benchmark overrides applied on top of the kind defaults
system_overrides = {
    "ks": {"trim_threshold": 0.2},
    "kdv": {"subsample": (70,)},
    "pm": {
        "trim_threshold": 0.2,
        "alpha_cap": 4,
        "beta_cap": 4,
        "subsample": (25,),
    },
    "lorenz": {"beta_cap": 3},
}

FORMAT_VERSION = "WIDENT1"
HEADER_SUFFIX = ".widh"
PAYLOAD_SUFFIX = ".widb"

# Spatial axis names in array order of appearance in labels
spatial_axis_names = ("x", "y")
default_variable_names = {
    "pde": ("u", "v", "w"),
    "ode": ("x", "y", "z", "w"),
}

sweep_columns = [
    "system",
    "sigma",
    "seed",
    "vary_key",
    "vary_value",
    "e2",
    "e_inf",
    "tpr",
    "ppv",
    "e_res",
    "e_dyn",
    "error",
]

diagnostic_columns = [
    "variable",
    "k",
    "cv_error",
    "support_size",
    "trim_iterations",
    "sp_support",
    "final_support",
    "status",
]

exit_codes = {
    "ok": 0,
    "numerical": 1,
    "input": 2,
}
