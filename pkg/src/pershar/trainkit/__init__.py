from .losses import triplet_loss, triplet_loss_grad
from .mining import (
    Triplet, TripletMiner, mine_mixed_triplets, mine_random_triplets, mine_subject_triplets,
)
from .train import EpochLog, TrainConfig, TrainLog, channel_stats, train_classifier, train_triplet

__all__ = [
    "EpochLog", "TrainConfig", "TrainLog", "Triplet", "TripletMiner", "channel_stats",
    "mine_mixed_triplets", "mine_random_triplets", "mine_subject_triplets", "train_classifier",
    "train_triplet", "triplet_loss", "triplet_loss_grad",
]
