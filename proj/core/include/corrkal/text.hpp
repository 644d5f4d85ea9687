#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

namespace corrkal::text {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

/// Fixed-point with the given number of decimals.
std::string format_fixed(double value, int decimals);

/// "[a, b, c]" using format_double for each entry.
std::string format_vector(const Eigen::VectorXd& values);

/// Strict parse: the whole (trimmed) token must be a number. Throws std::invalid_argument.
double parse_double(std::string_view token);
long long parse_int(std::string_view token);

/// Parses "[a, b, c]" (brackets optional, "[]" is empty). Throws std::invalid_argument.
Eigen::VectorXd parse_vector(std::string_view token);

std::string_view trim(std::string_view s) noexcept;
std::vector<std::string_view> split(std::string_view s, char sep);

}  // namespace corrkal::text
