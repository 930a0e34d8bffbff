#include "cobridge/value.hpp"

#include "cobridge/error.hpp"

#include <bit>
#include <set>
#include <sstream>

namespace cobridge {

std::string_view to_string(ValueKind kind) noexcept {
    switch (kind) {
        case ValueKind::Integer: return "integer";
        case ValueKind::Real: return "real";
        case ValueKind::Boolean: return "boolean";
        case ValueKind::Text: return "text";
    }
    return "?";
}

ValueKind value_kind_from_string(std::string_view name) {
    if (name == "integer" || name == "int") return ValueKind::Integer;
    if (name == "real" || name == "double") return ValueKind::Real;
    if (name == "boolean" || name == "bool") return ValueKind::Boolean;
    if (name == "text" || name == "string") return ValueKind::Text;
    throw ParseError("kind", "unknown value kind '" + std::string(name) + "'");
}

std::int64_t Value::as_integer() const {
    if (const auto* v = std::get_if<std::int64_t>(&data_)) return *v;
    throw UsageError("value is " + std::string(to_string(kind())) + ", not integer");
}

double Value::as_real() const {
    if (const auto* v = std::get_if<double>(&data_)) return *v;
    throw UsageError("value is " + std::string(to_string(kind())) + ", not real");
}

bool Value::as_boolean() const {
    if (const auto* v = std::get_if<bool>(&data_)) return *v;
    throw UsageError("value is " + std::string(to_string(kind())) + ", not boolean");
}

const std::string& Value::as_text() const {
    if (const auto* v = std::get_if<std::string>(&data_)) return *v;
    throw UsageError("value is " + std::string(to_string(kind())) + ", not text");
}

bool operator==(const Value& a, const Value& b) noexcept {
    if (a.data_.index() != b.data_.index()) return false;
    if (const auto* x = std::get_if<double>(&a.data_)) {
        return std::bit_cast<std::uint64_t>(*x) == std::bit_cast<std::uint64_t>(std::get<double>(b.data_));
    }
    return a.data_ == b.data_;
}

std::string Value::debug_string() const {
    std::ostringstream os;
    std::visit(
        [&os](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, bool>) {
                os << (v ? "true" : "false");
            } else if constexpr (std::is_same_v<T, std::string>) {
                os << '"' << v << '"';
            } else {
                os << v;
            }
        },
        data_);
    return os.str();
}

void check_unique_names(const std::vector<VariableDecl>& vars) {
    std::set<std::string> seen;
    for (const auto& v : vars) {
        if (v.name.empty()) throw UsageError("variable name must not be empty");
        if (!seen.insert(v.name).second) throw UsageError("duplicate variable name '" + v.name + "'");
    }
}

}  // namespace cobridge
