#pragma once

// Flat double vector with named group views.  Optimizers see one contiguous
// array; model code addresses pieces by name ("trial0.net", "beta", ...).

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kinvar/errors.hpp"

namespace kinvar::ad {

class ParamVector {
public:
    struct Group {
        std::string name;
        std::size_t offset = 0;
        std::size_t size = 0;
    };

    // appends a zero-initialized group, returns its offset
    std::size_t add_group(std::string name, std::size_t size) {
        if (has_group(name)) throw Error("duplicate parameter group '" + name + "'");
        const std::size_t off = data_.size();
        groups_.push_back({std::move(name), off, size});
        data_.resize(off + size, 0.0);
        return off;
    }

    std::size_t add_group(std::string name, std::span<const double> init) {
        const std::size_t off = add_group(std::move(name), init.size());
        std::copy(init.begin(), init.end(), data_.begin() + static_cast<std::ptrdiff_t>(off));
        return off;
    }

    bool has_group(std::string_view name) const {
        for (const auto& g : groups_)
            if (g.name == name) return true;
        return false;
    }

    const Group& group(std::string_view name) const {
        for (const auto& g : groups_)
            if (g.name == name) return g;
        throw Error("unknown parameter group '" + std::string(name) + "'");
    }

    std::span<double> span(std::string_view name) {
        const Group& g = group(name);
        return {data_.data() + g.offset, g.size};
    }
    std::span<const double> span(std::string_view name) const {
        const Group& g = group(name);
        return {data_.data() + g.offset, g.size};
    }

    std::span<const Group> groups() const { return groups_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::size_t size() const { return data_.size(); }

    std::span<double> all() { return {data_.data(), data_.size()}; }
    std::span<const double> all() const { return {data_.data(), data_.size()}; }

private:
    std::vector<double> data_;
    std::vector<Group> groups_;
};

} // namespace kinvar::ad
