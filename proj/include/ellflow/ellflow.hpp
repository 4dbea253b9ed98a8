#pragma once

#include "ellflow/errors.hpp"
#include "ellflow/elliptic.hpp"
#include "ellflow/conic.hpp"
#include "ellflow/curvature_flow.hpp"
#include "ellflow/melnikov.hpp"
#include "ellflow/billiard.hpp"
#include "ellflow/io.hpp"
