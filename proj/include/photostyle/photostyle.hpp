#pragma once

#include "photostyle/baselines.hpp"
#include "photostyle/config.hpp"
#include "photostyle/correspondence.hpp"
#include "photostyle/error.hpp"
#include "photostyle/feature_file.hpp"
#include "photostyle/features.hpp"
#include "photostyle/image.hpp"
#include "photostyle/label_io.hpp"
#include "photostyle/losses.hpp"
#include "photostyle/matting.hpp"
#include "photostyle/optimize.hpp"
#include "photostyle/png_io.hpp"
#include "photostyle/run.hpp"
#include "photostyle/segmentation.hpp"
#include "photostyle/sparse_sym.hpp"
#include "photostyle/transfer.hpp"
