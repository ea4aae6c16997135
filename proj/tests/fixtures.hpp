#pragma once

#include "aebs/config.hpp"

// Small but complete configuration that trains in well under a second per step.
inline aebs::AppConfig tiny_config() {
  aebs::AppConfig c;
  c.network.num_aebs = 2;
  c.network.num_gus = 4;
  c.network.num_antennas = 2;
  c.diffusion.steps = 3;
  c.diffusion.grid = 3;
  c.denoiser.layers = 1;
  c.denoiser.hidden = 8;
  c.denoiser.heads = 2;
  c.denoiser.time_dim = 4;
  c.train.trajectories = 3;
  c.train.timestep_samples = 2;
  c.train.steps = 3;
  c.train.learning_rate = 1e-2;
  c.train.workers = 1;
  c.solve.k_max = 2;
  c.solve.sca_max_iters = 10;
  return c;
}
