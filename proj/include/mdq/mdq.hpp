#pragma once

#include "mdq/error.hpp"
#include "mdq/rng.hpp"
#include "mdq/autodiff.hpp"
#include "mdq/grid.hpp"
#include "mdq/image.hpp"
#include "mdq/latents.hpp"
#include "mdq/laplace.hpp"
#include "mdq/mlp.hpp"
#include "mdq/synthesis.hpp"
#include "mdq/arm.hpp"
#include "mdq/training.hpp"
#include "mdq/param_quant.hpp"
#include "mdq/range_coder.hpp"
#include "mdq/bitstream.hpp"
#include "mdq/metrics.hpp"
#include "mdq/image_io.hpp"
#include "mdq/config.hpp"
#include "mdq/codec.hpp"
