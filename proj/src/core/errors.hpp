#pragma once

#include <stdexcept>
#include <string>

namespace stxm {

// Error taxonomy shared by the whole library. The C API and the CLI map
// these onto their numeric codes (argument -> usage, data/io -> data,
// numeric/simulation/fit -> numerical).
enum class ErrorKind {
    argument,    // bad parameter or domain violation
    data,        // input data unusable (too few exceedances, empty list, ...)
    numeric,     // numerical failure (Cholesky breakdown, pole, non-finite)
    simulation,  // sampler exceeded its proposal budget
    fit,         // optimizer did not converge
    io,          // file/network problem
    model        // model/schema mismatch
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error argument_error(std::string msg) { return Error(ErrorKind::argument, std::move(msg)); }
inline Error data_error(std::string msg) { return Error(ErrorKind::data, std::move(msg)); }
inline Error numeric_error(std::string msg) { return Error(ErrorKind::numeric, std::move(msg)); }
inline Error simulation_error(std::string msg) { return Error(ErrorKind::simulation, std::move(msg)); }
inline Error io_error(std::string msg) { return Error(ErrorKind::io, std::move(msg)); }
inline Error model_error(std::string msg) { return Error(ErrorKind::model, std::move(msg)); }

}  // namespace stxm
