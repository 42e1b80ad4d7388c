#pragma once

#include "dspace/monoid.hpp"
#include "dspace/relation.hpp"

#include <functional>
#include <string>
#include <vector>

namespace dspace {

enum class ProductKind { None, Disjoint, Parallel, Reconstruction };

/// A data space: carrier schema, information monoid, and a per-record
/// measure. The measure of a relation is the fold of the per-record measure
/// under the monoid, so it is additive over partitions by construction.
struct DataSpaceDescriptor {
    std::string name;
    Schema schema;
    InformationMonoid monoid;
    std::function<MonoidElement(const Record&)> per_record_measure;

    ProductKind product = ProductKind::None;
    /// Factors of a product space, in order.
    std::vector<DataSpaceDescriptor> components;
};

/// Same name, carrier, unit element, order flag and product structure.
/// Functions are not comparable, so this is the strongest equality available.
bool structurally_equal(const DataSpaceDescriptor& a, const DataSpaceDescriptor& b);

MonoidElement measure(const DataSpaceDescriptor& space, const Relation& rel);
/// Measure of loose records (no schema check).
MonoidElement measure_records(const DataSpaceDescriptor& space, const std::vector<const Record*>& records);

bool leq(const DataSpaceDescriptor& space, const MonoidElement& a, const MonoidElement& b);
MonoidElement fuse(const DataSpaceDescriptor& space, const MonoidElement& a, const MonoidElement& b);

/// Carrier equals information: each record measures to the singleton set of
/// its canonical encoding, fused by union and ordered by inclusion.
DataSpaceDescriptor identity_space(const Schema& schema);
/// Canonical token for a record, used as its identity-space element.
std::string record_token(const Record& r);

DataSpaceDescriptor count_space(const Schema& schema);
/// Sums `field` over records whose unit label equals `unit`. The label comes
/// from the cell itself for Quantity cells, else from `unit_field` (Missing
/// unit cells read as "(blank)"), else it is empty.
DataSpaceDescriptor sum_space(const Schema& schema, const std::string& field, const std::string& unit,
    const std::string& unit_field = {});
DataSpaceDescriptor min_space(const Schema& schema, const std::string& field, const std::string& unit = {});
DataSpaceDescriptor max_space(const Schema& schema, const std::string& field, const std::string& unit = {});
DataSpaceDescriptor avg_space(const Schema& schema, const std::string& field);
DataSpaceDescriptor ids_space(const Schema& schema, const std::string& field);
/// Signed amounts embedded as debit/credit pairs.
DataSpaceDescriptor paccioli_space(const Schema& schema, const std::string& field);

/// Unit label a record contributes under sum_space's rule.
std::string unit_label(const Record& r, const std::string& field, const std::string& unit_field);
/// Parallel product of one sum_space per unit label found in `rel`.
DataSpaceDescriptor sum_per_unit_space(const Relation& rel, const std::string& field, const std::string& unit_field = {});

/// Carrier is the product of disjoint carriers; measured on combined records.
DataSpaceDescriptor disjoint_product(const DataSpaceDescriptor& d1, const DataSpaceDescriptor& d2);
/// Shared carrier, paired information.
DataSpaceDescriptor parallel_product(const DataSpaceDescriptor& d1, const DataSpaceDescriptor& d2);
DataSpaceDescriptor parallel_product(const std::vector<DataSpaceDescriptor>& parts, const Schema& carrier);
/// Parallel product of distinct information carriers over one data carrier.
DataSpaceDescriptor recons_product(const DataSpaceDescriptor& d1, const DataSpaceDescriptor& d2);

enum class InfoSide { Left, Right };
DataSpaceDescriptor project_info(const DataSpaceDescriptor& space, InfoSide side);

} // namespace dspace
