"""Learning curves of the surrogate: per-epoch train and validation MSE,
stored as CSV and summarized with optional Savitzky-Golay smoothing."""
import numpy as np
import pandas as pd
from scipy.signal import savgol_filter

from thr_design.errors import ValidationError

COLUMNS = ['epoch', 'train_mse', 'val_mse']


class LearningCurve:
    def __init__(self, epochs=None, train_mse=None, val_mse=None) -> None:
        self.epochs = list(epochs or [])
        self.train_mse = list(train_mse or [])
        self.val_mse = list(val_mse or [])

    def append(self, epoch: int, train_mse: float, val_mse: float) -> None:
        self.epochs.append(int(epoch))
        self.train_mse.append(float(train_mse))
        self.val_mse.append(float(val_mse))

    def __len__(self):
        return len(self.epochs)

    def best_epoch(self) -> int:
        """Epoch of the lowest validation MSE, the earliest one on ties."""
        return self.epochs[int(np.argmin(self.val_mse))]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'epoch': self.epochs, 'train_mse': self.train_mse, 'val_mse': self.val_mse})

    def write_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False, float_format='%.17g', lineterminator='\n')

    @classmethod
    def read_csv(cls, path: str):
        try:
            df = pd.read_csv(path, float_precision='round_trip')
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise ValidationError(f"cannot read learning curve {path}: {e}")
        missing = set(COLUMNS) - set(df.columns)
        if missing:
            raise ValidationError(f"{path}: missing column(s) {sorted(missing)}")
        return cls(df['epoch'].astype(int).tolist(), df['train_mse'].tolist(), df['val_mse'].tolist())


def smooth_curve(values, window: int):
    """Second-order Savitzky-Golay smoothing. The window is made odd and
    shrunk to fit short curves; curves shorter than 3 points are returned
    unchanged."""
    values = np.asarray(values, dtype=float)
    window = min(int(window), len(values))
    if window % 2 == 0:
        window -= 1
    if window < 3:
        return values.copy()
    return savgol_filter(values, window, 2)


def curve_summary(curve: LearningCurve, average: int = None) -> dict:
    """Best epoch, losses at start, best and end, and the smoothed final
    losses when average is given."""
    if len(curve) == 0:
        raise ValidationError("learning curve is empty")
    best = curve.epochs.index(curve.best_epoch())
    summary = {
        'epochs': curve.epochs[-1],
        'best_epoch': curve.epochs[best],
        'best_val_mse': curve.val_mse[best],
        'initial_val_mse': curve.val_mse[0],
        'final_train_mse': curve.train_mse[-1],
        'final_val_mse': curve.val_mse[-1],
        'improved': curve.val_mse[best] < curve.val_mse[0],
    }
    if average:
        summary['average'] = int(average)
        summary['smoothed_final_train_mse'] = float(smooth_curve(curve.train_mse, average)[-1])
        summary['smoothed_final_val_mse'] = float(smooth_curve(curve.val_mse, average)[-1])
    return summary
