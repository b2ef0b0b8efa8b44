"""Reverse-mode autodiff engine, network architectures, physics losses and training."""

from .autodiff import Tensor, concat
from .losses import (loss_beer_lambert, loss_conservation, loss_data, loss_rte, rte_terms,
                     series_conservation)
from .models import ARCHITECTURES, Network, NetworkSpec, ShapeError, count_params, make_spec
from .train import (Batch, InputScaler, PhysicsContext, TrainState, TrainingError, attach_rte,
                    composite_loss, load_network, make_batch, reference_scattering, save_network,
                    time_inference, train)
