#pragma once

#include "tensor.hpp"
#include "ops.hpp"
#include "optimizer.hpp"
#include "reed_solomon.hpp"
#include "codec.hpp"
#include "image.hpp"
#include "png_io.hpp"
#include "metrics.hpp"
#include "lsb.hpp"
#include "networks.hpp"
#include "weights_io.hpp"
#include "config.hpp"
#include "loader.hpp"
#include "synthetic.hpp"
#include "stego.hpp"
#include "training.hpp"
