#ifndef CHDBC_VERSION_HPP
#define CHDBC_VERSION_HPP

namespace chdbc {

inline constexpr const char* project_name = "chdbc";
inline constexpr const char* project_version = "0.1.0";

}  // namespace chdbc

#endif
