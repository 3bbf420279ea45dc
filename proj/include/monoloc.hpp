#pragma once

#include "monoloc/camera_models.hpp"
#include "monoloc/config.hpp"
#include "monoloc/defaults.hpp"
#include "monoloc/dogbox.hpp"
#include "monoloc/errors.hpp"
#include "monoloc/evalkit.hpp"
#include "monoloc/height_calibration.hpp"
#include "monoloc/observation.hpp"
#include "monoloc/pose_solver.hpp"
#include "monoloc/robust_loss.hpp"
#include "monoloc/tracking.hpp"
