#pragma once

// Umbrella header: multivariate autoregressive modeling, partial directed
// coherence, resampling-based significance thresholds, and the experiment
// runner built on top of them.

#include "mvarpdc/csv_io.hpp"
#include "mvarpdc/errors.hpp"
#include "mvarpdc/experiment.hpp"
#include "mvarpdc/least_squares.hpp"
#include "mvarpdc/mvar_model.hpp"
#include "mvarpdc/parallel.hpp"
#include "mvarpdc/pdc.hpp"
#include "mvarpdc/random.hpp"
#include "mvarpdc/signalgen.hpp"
#include "mvarpdc/significance.hpp"
#include "mvarpdc/sparse_bayes.hpp"
#include "mvarpdc/trial_set.hpp"
#include "mvarpdc/version.hpp"
#include "mvarpdc/yule_walker.hpp"
