#pragma once

#define MVARPDC_VERSION_MAJOR 1
#define MVARPDC_VERSION_MINOR 0
#define MVARPDC_VERSION_PATCH 0
#define MVARPDC_VERSION "1.0.0"

namespace mvarpdc {
inline const char* version() { return MVARPDC_VERSION; }
}
