from .scenario import (Scenario, GridSpec, StateSpec, EnvSpec, GammaSpec, EnsembleSpec, PartitionSpec, PvmSpec,
                       ToleranceSpec, load_scenario, load_packaged_scenario, packaged_scenarios, scenario_from_dict)
