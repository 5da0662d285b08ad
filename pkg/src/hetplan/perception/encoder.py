"""3-d convolutional shape encoder with autoencoder pretraining.

Encoder stack: Conv3D(1->32, k5) -> ELU -> pool2 -> Conv3D(32->32, k3) ->
ELU -> pool2 -> FC(32*6*6*6 -> 12). fit() trains it as an autoencoder on
voxel grids (mean squared voxel error) against a small upsampling decoder,
then freezes the weights; transform() maps grids to 12-dim shape codes.

sklearn-style surface: fit / transform / fit_transform / get_params.
"""

import warnings

import numpy as np

from ..exceptions import NotFittedError
from ..nn import autodiff as ad
from ..nn.checkpoint import load_checkpoint, save_checkpoint
from ..nn.layers import Conv3d, Dense
from ..nn.optim import Adam
from ..validation import ParamsMixin, check_random_state
from .voxel import RESOLUTION

CODE_DIM = 12
ENCODER_LAYERS = ("conv3d(1,32,5)", "elu", "maxpool3d(2)",
                  "conv3d(32,32,3)", "elu", "maxpool3d(2)", "dense(6912,12)")


class VoxelShapeEncoder(ParamsMixin):
    def __init__(self, epochs=8, batch_size=8, learning_rate=1e-3, seed=0,
                 allow_random=False):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.allow_random = allow_random
        self.fitted_ = None
        self.loss_history_ = None
        self._params = None
        self._cache = {}

    # -- construction ------------------------------------------------------

    def _build(self, rng):
        self._enc_conv1 = Conv3d("enc.conv1", 1, 32, 5, rng)
        self._enc_conv2 = Conv3d("enc.conv2", 32, 32, 3, rng)
        self._enc_fc = Dense("enc.fc", 32 * 6 * 6 * 6, CODE_DIM, rng)
        self._dec_fc = Dense("dec.fc", CODE_DIM, 16 * 8 * 8 * 8, rng)
        self._dec_conv1 = Conv3d("dec.conv1", 16, 16, 3, rng)
        self._dec_conv2 = Conv3d("dec.conv2", 16, 1, 3, rng)
        self._params = []
        for layer in (self._enc_conv1, self._enc_conv2, self._enc_fc,
                      self._dec_fc, self._dec_conv1, self._dec_conv2):
            self._params.extend(layer.parameters())

    def _ensure_params(self):
        if self._params is not None:
            return
        if not self.allow_random:
            raise NotFittedError(
                "VoxelShapeEncoder is not fitted; call fit(), load a checkpoint, "
                "or construct with allow_random=True")
        warnings.warn("VoxelShapeEncoder running with random weights", stacklevel=2)
        self._build(check_random_state(self.seed))
        self.fitted_ = "random"

    def _encode_t(self, x):
        h = ad.maxpool3d(ad.elu(self._enc_conv1(x)))
        h = ad.maxpool3d(ad.elu(self._enc_conv2(h)))
        flat = ad.reshape(h, (h.data.shape[0], 32 * 6 * 6 * 6))
        return self._enc_fc(flat)

    def _decode_t(self, code):
        h = ad.elu(self._dec_fc(code))
        h = ad.reshape(h, (code.data.shape[0], 16, 8, 8, 8))
        h = ad.upsample_nn3d(h)
        h = ad.elu(self._dec_conv1(ad.pad3d(h, 1)))
        h = ad.upsample_nn3d(h)
        return ad.sigmoid(self._dec_conv2(ad.pad3d(h, 1)))

    # -- estimator surface ---------------------------------------------------

    def fit(self, grids, y=None):
        """Pretrain on voxel grids; weights are frozen afterwards."""
        grids = _as_grid_array(grids)
        if len(grids) < 1:
            raise ValueError("need at least one grid")
        rng = check_random_state(self.seed)
        self._build(rng)
        opt = Adam(self._params, lr=self.learning_rate)
        history = []
        last_good = None
        n = len(grids)
        for epoch in range(self.epochs):
            order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, self.batch_size):
                batch = grids[order[start:start + self.batch_size]]
                x = ad.constant(batch[:, None, :, :, :])
                recon = self._decode_t(self._encode_t(x))
                loss = ad.tmean(ad.mul(ad.sub(recon, x), ad.sub(recon, x)))
                if not np.isfinite(loss.item()):
                    if last_good is not None:
                        for p, v in zip(self._params, last_good):
                            p.data = v
                    warnings.warn("encoder pretraining diverged; "
                                  "keeping last finite checkpoint")
                    self.fitted_ = True
                    self.loss_history_ = history
                    return self
                opt.zero_grad()
                ad.backward(loss)
                opt.step()
                epoch_loss += loss.item() * len(batch)
            history.append(epoch_loss / n)
            last_good = [p.data.copy() for p in self._params]
        self.fitted_ = True
        self.loss_history_ = history
        self._cache = {}
        return self

    def reconstruction_loss(self, grids):
        """Mean squared voxel error of the current weights on `grids`."""
        self._ensure_params()
        grids = _as_grid_array(grids)
        x = ad.constant(grids[:, None, :, :, :])
        recon = self._decode_t(self._encode_t(x))
        return float(((recon.data - x.data) ** 2).mean())

    def transform(self, grids):
        """Map grids to 12-dim shape codes (cached by grid content)."""
        self._ensure_params()
        grids = _as_grid_array(grids)
        out = np.empty((len(grids), CODE_DIM), dtype=np.float64)
        misses = []
        for i, g in enumerate(grids):
            key = g.tobytes()
            hit = self._cache.get(key)
            if hit is None:
                misses.append((i, key))
            else:
                out[i] = hit
        if misses:
            batch = np.stack([grids[i] for i, _ in misses])
            codes = self._encode_t(ad.constant(batch[:, None, :, :, :])).data
            for (i, key), code in zip(misses, codes):
                self._cache[key] = code
                out[i] = code
        return out

    def fit_transform(self, grids, y=None):
        return self.fit(grids).transform(grids)

    def encode_one(self, grid):
        return self.transform(np.asarray(grid)[None])[0]

    # -- persistence -------------------------------------------------------

    def save(self, path):
        self._ensure_params()
        params = {p.name: p.data for p in self._params}
        save_checkpoint(path, "encoder", params,
                        hyper=self.get_params(),
                        extra={"layers": list(ENCODER_LAYERS), "code_dim": CODE_DIM,
                               "loss_history": self.loss_history_ or []})

    @classmethod
    def load(cls, path):
        header, params = load_checkpoint(path, expect_kind="encoder")
        hyper = dict(header["hyper"])
        est = cls(**{k: hyper[k] for k in cls._param_names() if k in hyper})
        est._build(check_random_state(est.seed))
        for p in est._params:
            p.data = params[p.name]
        est.fitted_ = True
        est.loss_history_ = header["extra"].get("loss_history")
        return est

    def fingerprint(self):
        """Stable digest of the weights, recorded in dataset manifests."""
        import hashlib
        self._ensure_params()
        digest = hashlib.sha256()
        for p in sorted(self._params, key=lambda p: p.name):
            digest.update(p.name.encode())
            digest.update(p.data.tobytes())
        return digest.hexdigest()[:16]


def _as_grid_array(grids):
    arr = np.asarray(grids, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[1:] != (RESOLUTION,) * 3:
        raise ValueError(f"expected (n, {RESOLUTION}, {RESOLUTION}, {RESOLUTION}) grids, "
                         f"got {arr.shape}")
    return arr
