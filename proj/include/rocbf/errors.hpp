#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rocbf {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Power iteration or another iterative scheme failed to converge.
struct NumericalError : std::runtime_error {
    int iterations;
    NumericalError(const std::string& msg, int iters)
        : std::runtime_error(msg), iterations(iters) {}
};

// Training blew up; carries the last finite iterate.
struct TrainingDivergedError : std::runtime_error {
    double last_loss;
    std::vector<double> last_theta;
    TrainingDivergedError(const std::string& msg, double loss,
                          std::vector<double> theta)
        : std::runtime_error(msg), last_loss(loss), last_theta(std::move(theta)) {}
};

}  // namespace rocbf
