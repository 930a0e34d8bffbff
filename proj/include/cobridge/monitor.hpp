#pragma once

#include "cobridge/time.hpp"
#include "cobridge/value.hpp"

#include <map>
#include <optional>
#include <string>

namespace cobridge {

struct MonitorConfig {
    /// Safety distance in meters; must be positive.
    double threshold = 1.0;
    std::string robot_x = "x_r";
    std::string robot_y = "y_r";
    std::string obstacle_x = "x_o";
    std::string obstacle_y = "y_o";
    std::string distance_out = "distance";
    std::string stop_out = "stop";

    void validate() const;
};

struct MonitorResult {
    double distance = 0.0;
    bool stop = false;
};

/// Euclidean robot-obstacle distance; stop when strictly below `threshold`.
/// Throws UsageError on non-finite input.
MonitorResult monitor_step(double x_r, double y_r, double x_o, double y_o, double threshold);

/// Co-simulation unit wrapping monitor_step. Until all four positions have been set its
/// outputs are distance = +inf and stop = false.
class MonitorUnit {
public:
    explicit MonitorUnit(MonitorConfig config);

    /// Accepts the four position names; reals or integers.
    void set_input(const std::string& name, const Value& value);
    Value get_output(const std::string& name) const;
    void do_step(SimTime t_cur, Duration step);

    const MonitorConfig& config() const noexcept { return config_; }
    const MonitorResult& last() const noexcept { return out_; }

private:
    MonitorConfig config_;
    std::map<std::string, double> inputs_;
    MonitorResult out_;
};

}  // namespace cobridge
