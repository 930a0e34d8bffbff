#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cobridge {

enum class ValueKind { Integer, Real, Boolean, Text };

std::string_view to_string(ValueKind kind) noexcept;
/// Accepts `integer`/`int`, `real`/`double`, `boolean`/`bool`, `text`/`string`.
ValueKind value_kind_from_string(std::string_view name);

/// One variable value. Equality on reals compares bit patterns so change detection sees
/// -0.0 vs 0.0 and distinct NaN payloads as changes.
class Value {
public:
    Value() : data_(std::int64_t{0}) {}
    Value(std::int64_t v) : data_(v) {}
    Value(int v) : data_(std::int64_t{v}) {}
    Value(double v) : data_(v) {}
    Value(bool v) : data_(v) {}
    Value(std::string v) : data_(std::move(v)) {}
    Value(const char* v) : data_(std::string(v)) {}

    ValueKind kind() const noexcept { return static_cast<ValueKind>(data_.index()); }

    bool is_integer() const noexcept { return kind() == ValueKind::Integer; }
    bool is_real() const noexcept { return kind() == ValueKind::Real; }
    bool is_boolean() const noexcept { return kind() == ValueKind::Boolean; }
    bool is_text() const noexcept { return kind() == ValueKind::Text; }

    std::int64_t as_integer() const;
    double as_real() const;
    bool as_boolean() const;
    const std::string& as_text() const;

    friend bool operator==(const Value& a, const Value& b) noexcept;

    std::string debug_string() const;

private:
    // Alternative order matches ValueKind.
    std::variant<std::int64_t, double, bool, std::string> data_;
};

enum class Direction { Input, Output };

struct VariableDecl {
    std::string name;
    ValueKind kind = ValueKind::Real;
    Direction direction = Direction::Output;

    bool operator==(const VariableDecl&) const = default;
};

/// Throws UsageError on duplicate names.
void check_unique_names(const std::vector<VariableDecl>& vars);

}  // namespace cobridge
