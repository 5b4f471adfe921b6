#pragma once

#include "scarforge/aha.hpp"
#include "scarforge/blob.hpp"
#include "scarforge/bullseye.hpp"
#include "scarforge/demons.hpp"
#include "scarforge/distance.hpp"
#include "scarforge/errors.hpp"
#include "scarforge/filter.hpp"
#include "scarforge/grid.hpp"
#include "scarforge/lesion_histogram.hpp"
#include "scarforge/mi.hpp"
#include "scarforge/morphology.hpp"
#include "scarforge/nrrd.hpp"
#include "scarforge/phantom.hpp"
#include "scarforge/predictor.hpp"
#include "scarforge/preprocess.hpp"
#include "scarforge/rigid.hpp"
#include "scarforge/rng.hpp"
#include "scarforge/schedule.hpp"
#include "scarforge/seg_metrics.hpp"
#include "scarforge/serialize.hpp"
#include "scarforge/smile.hpp"
#include "scarforge/synthesis.hpp"
