from .model import LocalNOModel, count_params, model_apply_at_resolution, model_forward
from .trainer import relative_l2, train_loop

__all__ = ['LocalNOModel', 'count_params', 'model_apply_at_resolution', 'model_forward',
           'relative_l2', 'train_loop']
