from dataclasses import dataclass


@dataclass
class DomainError(Exception):
    """Base class for all domain-level errors.

    These represent validation or numerical failures that occur within the
    reconstruction core, independent of transport concerns (CLI or HTTP).
    Raise subclasses of this in geometry, sampling, losses, stores and services.
    """

    message: str
    code: str = 'domain_error'

    def __post_init__(self):
        # subclasses carry their code as a class attribute
        if self.code == DomainError.code:
            self.code = type(self).code

    def __str__(self) -> str:
        return self.message


class ConfigError(DomainError):
    """Raised when the system is misconfigured.

    Use this for invalid run configurations, settings or scene descriptions
    that prevent training or rendering from starting.
    """

    code = 'missing or misconfigured setting'


# 4xx
class InvalidArgument(DomainError):  # 422
    code = 'invalid_argument'


class UnsatisfiableMask(DomainError):  # 422
    code = 'unsatisfiable_mask'


class UndefinedBatch(DomainError):  # 422
    code = 'undefined_batch'


class CheckpointNotFound(DomainError):  # 404
    code = 'checkpoint_not_found'


class CheckpointIncompatible(DomainError):  # 409
    code = 'checkpoint_incompatible'


# dataset
class IngestionError(DomainError):
    code = 'ingestion_error'


class DatasetValidationError(DomainError):
    code = 'dataset_validation_error'


class NormalizationError(DomainError):
    code = 'normalization_error'


# training
@dataclass
class NonFiniteLoss(DomainError):
    term: str = ''
    code: str = 'non_finite_loss'
