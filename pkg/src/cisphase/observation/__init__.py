from .measurement import MeasurementModel, info_matrix, los_measurement, observation_jacobian
from .tensor import InfoTensor, TargetTrack, TaskingEnvironment, build_info_tensor, observer_slice
