"""Contour classification network: a small U-shaped encoder-decoder.

Input is the (t_bins, H, W) event volume as channels; output is a logit
map of the same shape, read out per event at its (t, y, x) bin.  Three
down / three up stages with skip connections; sizes pad up to a multiple
of 8 inside forward.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


def _block(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, padding=1),
        nn.BatchNorm2d(c_out),
        nn.ReLU(inplace=True),
        nn.Conv2d(c_out, c_out, 3, padding=1),
        nn.BatchNorm2d(c_out),
        nn.ReLU(inplace=True),
    )


class ContourNet(nn.Module):
    def __init__(self, t_bins: int = 10, base: int = 16):
        super().__init__()
        self.t_bins = t_bins
        self.enc1 = _block(t_bins, base)
        self.enc2 = _block(base, base * 2)
        self.enc3 = _block(base * 2, base * 4)
        self.bottom = _block(base * 4, base * 4)
        self.up3 = nn.ConvTranspose2d(base * 4, base * 4, 2, stride=2)
        self.dec3 = _block(base * 8, base * 2)
        self.up2 = nn.ConvTranspose2d(base * 2, base * 2, 2, stride=2)
        self.dec2 = _block(base * 4, base)
        self.up1 = nn.ConvTranspose2d(base, base, 2, stride=2)
        self.dec1 = _block(base * 2, base)
        self.head = nn.Conv2d(base, t_bins, 1)

    def forward(self, volume: torch.Tensor) -> torch.Tensor:
        """(B, t_bins, H, W) event volume -> logits of the same shape."""
        _, _, h, w = volume.shape
        pad_h = (-h) % 8
        pad_w = (-w) % 8
        x = F.pad(volume, (0, pad_w, 0, pad_h))
        e1 = self.enc1(x)
        e2 = self.enc2(F.max_pool2d(e1, 2))
        e3 = self.enc3(F.max_pool2d(e2, 2))
        b = self.bottom(F.max_pool2d(e3, 2))
        d3 = self.dec3(torch.cat([self.up3(b), e3], dim=1))
        d2 = self.dec2(torch.cat([self.up2(d3), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up1(d2), e1], dim=1))
        out = self.head(d1)
        return out[:, :, :h, :w]
