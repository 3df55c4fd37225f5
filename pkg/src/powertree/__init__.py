"""Decision-tree dynamic power modeling with a bit-exact hardware-monitor
simulator and multi-phase regulator phase shedding."""

from .workload import (DEFAULT_NONLINEAR_STRENGTH, Dataset, DesignSpec, Net,
                       NonlinearUnit, Sample, SyntheticDesign, ToggleTrace,
                       activity, compose_datasets, dynamic_power,
                       generate_design, hybrid_design_spec, linear_design_spec,
                       load_dataset, load_design, rank_signals_by_activity,
                       save_dataset, save_design, simulate_dataset,
                       synthesize_trace)
from .model import (DecisionTree, EnsembleModel, HyperParams, LinearModel,
                    TreeNode, best_split, feature_importances, fit_linear,
                    fit_tree, load_linear, load_tree, mae_percent,
                    predict_ensemble, predict_linear, predict_linear_batch,
                    predict_tree, predict_tree_batch, rule_text, save_linear,
                    save_tree, scale_prediction)
from .selection import RfeResult, RfeStep, rfe, rfe_history_text
from .tuning import (CvResult, CvRow, Grid, LearningPoint, cv_table_text,
                     grid_search_cv, kfold_split, learning_curve,
                     learning_curve_text)
from .hwsim import (CounterState, EngineState, MalformedImageError, MemNode,
                    MonitorConfig, TreeMemoryImage, counter_step,
                    dequantize_mw, engine_invoke, fsm_trace_text, load_image,
                    node_decode, node_encode, period_features, quantize,
                    run_monitor, save_image, validate_image)
from .pdn import (PdnModel, PhaseLut, build_lut, efficiency, input_power,
                  load_lut, load_pdn_model, optimal_phases, save_lut,
                  save_pdn_model, shed, shed_rows, shed_table_text)

__version__ = "0.1.0"
