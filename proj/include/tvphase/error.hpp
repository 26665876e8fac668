#pragma once

#include <stdexcept>
#include <string>

namespace tvphase {

/* Input has the wrong shape (signal too short, mismatched lengths). */
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what)
        : std::invalid_argument(what) {}
};

/* A scalar argument lies outside its domain. */
class ParameterError : public std::invalid_argument {
public:
    explicit ParameterError(const std::string& what)
        : std::invalid_argument(what) {}
};

/* A variation pattern that no support/sign layout can realize. */
class InfeasibleError : public std::invalid_argument {
public:
    explicit InfeasibleError(const std::string& what)
        : std::invalid_argument(what) {}
};

/* Malformed CSV / JSON input. */
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what)
        : std::runtime_error(what) {}
};

} // namespace tvphase
