#include "dagfit/datatype.hpp"

#include <sstream>

namespace dagfit {

DataType DataType::histogram(std::vector<double> bin_edges) {
    DataType dt;
    dt.kind = Kind::Histogram;
    if (bin_edges.size() < 2)
        throw TypeMismatch("histogram needs at least 2 bin edges");
    dt.shape = {bin_edges.size() - 1};
    dt.edges = std::move(bin_edges);
    dt.validate();
    return dt;
}

void DataType::validate() const {
    if (shape.empty() || shape.size() > 2)
        throw TypeMismatch("rank must be 1 or 2, got " + std::to_string(shape.size()));
    for (std::size_t s : shape)
        if (s == 0) throw TypeMismatch("zero extent in shape");
    if (kind == Kind::Histogram) {
        if (shape.size() != 1)
            throw TypeMismatch("histogram must be rank 1");
        if (edges.size() != shape[0] + 1)
            throw TypeMismatch("histogram with " + std::to_string(shape[0]) + " bins needs " +
                               std::to_string(shape[0] + 1) + " edges, got " +
                               std::to_string(edges.size()));
        for (std::size_t i = 0; i + 1 < edges.size(); ++i)
            if (!(edges[i] < edges[i + 1]))
                throw TypeMismatch("histogram edges not strictly increasing at index " +
                                   std::to_string(i));
    } else if (!edges.empty()) {
        throw TypeMismatch("points type must not carry edges");
    }
}

std::string DataType::to_string() const {
    std::ostringstream os;
    os << (kind == Kind::Histogram ? "Histogram[" : "Points[");
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

} // namespace dagfit
