"""Schema, CSV round trips, loader diagnostics, binning, and splits."""

import numpy as np
import pytest

from detangle.dataset import (
    DEFAULT_BINS,
    EQUAL_WIDTH,
    FactorSchema,
    QUANTILE,
    RepresentationSet,
    SplitSpec,
    discretize_neuron,
    expected_header,
    load_representation_set,
    load_schema,
    make_split,
    split_indices,
    write_representation_set,
    write_schema,
)
from detangle.errors import (
    HeaderMismatchError,
    LabelOutOfRangeError,
    MalformedCsvError,
    NonFiniteLatentError,
    SchemaError,
    SplitError,
    ValidationError,
)

SCHEMA = FactorSchema(("colour", "shape"), (2, 3))


def small_rep(n=12, m=3, seed=0):
    rng = np.random.default_rng(seed)
    latents = rng.normal(size=(n, m))
    labels = np.column_stack([rng.integers(0, 2, n), rng.integers(0, 3, n)])
    return RepresentationSet(latents, labels, SCHEMA)


class TestFactorSchema:
    def test_valid_roundtrip(self):
        payload = SCHEMA.to_json_dict()
        assert payload == {
            "factors": [
                {"name": "colour", "cardinality": 2},
                {"name": "shape", "cardinality": 3},
            ]
        }
        assert FactorSchema.from_json_dict(payload) == SCHEMA

    def test_index_of_name_and_int(self):
        assert SCHEMA.index_of("shape") == 1
        assert SCHEMA.index_of(0) == 0
        with pytest.raises(SchemaError):
            SCHEMA.index_of("size")
        with pytest.raises(SchemaError):
            SCHEMA.index_of(2)

    @pytest.mark.parametrize(
        "names,cards",
        [
            ((), ()),
            (("a", "a"), (2, 2)),
            (("a",), (1,)),
            (("a", "b"), (2,)),
        ],
    )
    def test_invalid_schemas(self, names, cards):
        with pytest.raises(SchemaError):
            FactorSchema(names, cards)

    def test_from_json_dict_rejects_junk(self):
        with pytest.raises(SchemaError):
            FactorSchema.from_json_dict({"factors": []})
        with pytest.raises(SchemaError):
            FactorSchema.from_json_dict({"nope": 1})
        with pytest.raises(SchemaError):
            FactorSchema.from_json_dict({"factors": [{"name": "a"}]})
        with pytest.raises(SchemaError):
            FactorSchema.from_json_dict({"factors": [{"name": "a", "cardinality": "2"}]})


class TestRepresentationSet:
    def test_immutable_and_shapes(self):
        rep = small_rep()
        assert rep.n_rows == 12 and rep.n_neurons == 3 and rep.n_factors == 2
        with pytest.raises(ValueError):
            rep.latents[0, 0] = 5.0
        with pytest.raises(ValueError):
            rep.labels[0, 0] = 1

    def test_rejects_fewer_neurons_than_factors(self):
        with pytest.raises(ValidationError, match="m=1 < n=2"):
            RepresentationSet(np.zeros((4, 1)), np.zeros((4, 2), dtype=int), SCHEMA)

    def test_rejects_nan_latent(self):
        latents = np.zeros((4, 2))
        latents[2, 1] = np.nan
        with pytest.raises(NonFiniteLatentError) as exc:
            RepresentationSet(latents, np.zeros((4, 2), dtype=int), SCHEMA)
        assert exc.value.line == 2 and exc.value.column == "z1"

    def test_rejects_out_of_range_label(self):
        labels = np.zeros((4, 2), dtype=int)
        labels[3, 1] = 3
        with pytest.raises(LabelOutOfRangeError):
            RepresentationSet(np.zeros((4, 2)), labels, SCHEMA)

    def test_rejects_non_integer_labels(self):
        with pytest.raises(ValidationError, match="integer"):
            RepresentationSet(np.zeros((4, 2)), np.full((4, 2), 0.5), SCHEMA)

    def test_subset_keeps_order(self):
        rep = small_rep()
        sub = rep.subset(np.array([5, 1, 3]))
        assert np.array_equal(sub.latents, rep.latents[[5, 1, 3]])
        assert np.array_equal(sub.labels, rep.labels[[5, 1, 3]])
        with pytest.raises(ValidationError):
            rep.subset(np.array([], dtype=int))


class TestCsvIO:
    def test_write_load_roundtrip_bit_exact(self, tmp_path):
        rep = small_rep(seed=5)
        write_representation_set(rep, tmp_path / "data.csv", tmp_path / "schema.json")
        back = load_representation_set(tmp_path / "data.csv", tmp_path / "schema.json")
        assert np.array_equal(back.latents, rep.latents)
        assert np.array_equal(back.labels, rep.labels)
        assert back.schema == rep.schema
        header = (tmp_path / "data.csv").read_text().splitlines()[0]
        assert header == "z0,z1,z2,g0,g1"

    def test_expected_header(self):
        assert expected_header(2, 1) == ["z0", "z1", "g0"]

    def write(self, tmp_path, text):
        path = tmp_path / "data.csv"
        path.write_text(text)
        write_schema(SCHEMA, tmp_path / "schema.json")
        return path, tmp_path / "schema.json"

    def test_missing_file_is_io_error(self, tmp_path):
        from detangle.errors import DataIOError

        write_schema(SCHEMA, tmp_path / "schema.json")
        with pytest.raises(DataIOError):
            load_representation_set(tmp_path / "nope.csv", tmp_path / "schema.json")

    def test_header_mismatch_names_line(self, tmp_path):
        data, schema = self.write(tmp_path, "a,b,c,d\n0,0,0,0\n")
        with pytest.raises(HeaderMismatchError) as exc:
            load_representation_set(data, schema)
        assert exc.value.line == 1

    def test_header_wrong_factor_count(self, tmp_path):
        data, schema = self.write(tmp_path, "z0,z1,g0\n0.0,0.0,0\n")
        with pytest.raises(HeaderMismatchError, match="declares 2"):
            load_representation_set(data, schema)

    def test_ragged_row_reports_line(self, tmp_path):
        data, schema = self.write(tmp_path, "z0,g0,g1\n0.5,1,2\n0.5,1\n")
        with pytest.raises(MalformedCsvError) as exc:
            load_representation_set(data, schema)
        assert exc.value.line == 3

    def test_unparseable_latent_reports_line_and_column(self, tmp_path):
        data, schema = self.write(tmp_path, "z0,g0,g1\n0.5,1,2\nx,0,0\n")
        with pytest.raises(MalformedCsvError) as exc:
            load_representation_set(data, schema)
        assert exc.value.line == 3 and exc.value.column == "z0"

    def test_non_finite_latent_reports_position(self, tmp_path):
        data, schema = self.write(tmp_path, "z0,g0,g1\nnan,1,2\n")
        with pytest.raises(NonFiniteLatentError) as exc:
            load_representation_set(data, schema)
        assert exc.value.line == 2 and exc.value.column == "z0"

    def test_label_out_of_range_reports_factor(self, tmp_path):
        data, schema = self.write(tmp_path, "z0,g0,g1\n0.5,1,3\n")
        with pytest.raises(LabelOutOfRangeError, match="'shape'") as exc:
            load_representation_set(data, schema)
        assert exc.value.line == 2 and exc.value.column == "g1"

    def test_empty_and_header_only_files(self, tmp_path):
        data, schema = self.write(tmp_path, "")
        with pytest.raises(MalformedCsvError, match="empty"):
            load_representation_set(data, schema)
        data, schema = self.write(tmp_path, "z0,g0,g1\n")
        with pytest.raises(MalformedCsvError, match="no data rows"):
            load_representation_set(data, schema)

    def test_schema_errors(self, tmp_path):
        (tmp_path / "schema.json").write_text("{not json")
        with pytest.raises(SchemaError):
            load_schema(tmp_path / "schema.json")


class TestDiscretize:
    def test_quantile_boundaries_at_fractional_ranks(self):
        values = np.arange(100, dtype=float)
        disc = discretize_neuron(values, n_bins=4)
        assert disc.strategy == QUANTILE and not disc.level_mapped
        assert np.allclose(disc.boundaries, np.quantile(values, [0.25, 0.5, 0.75]))
        counts = np.bincount(disc.bins, minlength=4)
        assert counts.sum() == 100 and counts.min() >= 24

    def test_boundary_tie_goes_to_lower_bin(self):
        disc = discretize_neuron(np.arange(100, dtype=float), n_bins=4)
        boundary = disc.boundaries[0]
        idx = np.where(np.arange(100.0) == boundary)[0]
        if idx.size:
            assert disc.bins[idx[0]] == 0

    def test_level_mapped_keeps_alphabet(self):
        values = np.array([3.0, -1.0, 3.0, 7.0, -1.0, 7.0, 3.0])
        disc = discretize_neuron(values, n_bins=DEFAULT_BINS)
        assert disc.level_mapped and disc.n_bins == 3
        assert np.array_equal(disc.bins, np.array([1, 0, 1, 2, 0, 2, 1]))

    def test_constant_neuron_degenerate(self):
        disc = discretize_neuron(np.full(9, 2.5), n_bins=8)
        assert disc.degenerate and np.all(disc.bins == 0)

    def test_equal_width(self):
        values = np.concatenate([np.zeros(50), np.ones(50) * 10.0, np.linspace(0, 10, 21)])
        disc = discretize_neuron(values, n_bins=2, strategy=EQUAL_WIDTH)
        assert disc.n_bins == 2
        assert np.all(disc.bins[values <= 5.0] == 0)
        assert np.all(disc.bins[values > 5.0] == 1)

    def test_bad_arguments(self):
        with pytest.raises(ValidationError):
            discretize_neuron(np.array([]), n_bins=4)
        with pytest.raises(ValidationError):
            discretize_neuron(np.ones(5), n_bins=0)
        with pytest.raises(ValidationError):
            discretize_neuron(np.ones(5), strategy="magic")
        with pytest.raises(NonFiniteLatentError):
            discretize_neuron(np.array([1.0, np.inf]))

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        values = rng.normal(size=500)
        a = discretize_neuron(values, n_bins=10)
        b = discretize_neuron(values.copy(), n_bins=10)
        assert np.array_equal(a.bins, b.bins)
        assert np.array_equal(a.boundaries, b.boundaries)


class TestSplits:
    def test_random_split_partition(self):
        rep = small_rep(n=50)
        spec = SplitSpec(kind="random", test_fraction=0.2, seed=9)
        train, test = split_indices(rep, spec)
        assert test.size == 10 and train.size == 40
        assert np.array_equal(np.sort(np.concatenate([train, test])), np.arange(50))
        train2, test2 = split_indices(rep, spec)
        assert np.array_equal(train, train2) and np.array_equal(test, test2)
        _, test3 = split_indices(rep, SplitSpec(kind="random", test_fraction=0.2, seed=10))
        assert not np.array_equal(test, test3)

    def test_random_split_fraction_bounds(self):
        rep = small_rep(n=4)
        with pytest.raises(SplitError):
            split_indices(rep, SplitSpec(kind="random", test_fraction=0.1, seed=1))
        with pytest.raises(SplitError):
            SplitSpec(kind="random", test_fraction=1.5, seed=1)
        with pytest.raises(SplitError):
            SplitSpec(kind="random", test_fraction=0.5)

    def test_cg_exclusion_membership(self):
        rep = small_rep(n=60, seed=2)
        spec = SplitSpec(kind="cg_exclusion", factor_a="colour", value_a=1,
                         factor_b="shape", value_b=2)
        train, test = split_indices(rep, spec)
        mask = (rep.labels[:, 0] == 1) & (rep.labels[:, 1] == 2)
        assert np.array_equal(test, np.where(mask)[0])
        assert np.array_equal(train, np.where(~mask)[0])
        train_set, test_set = make_split(rep, spec)
        assert train_set.n_rows == train.size and test_set.n_rows == test.size

    def test_cg_exclusion_errors(self):
        rep = small_rep(n=30, seed=4)
        with pytest.raises(SplitError, match="matches no rows"):
            labels = rep.labels.copy()
            labels[:, 0] = 0
            only_zero = RepresentationSet(rep.latents, labels, SCHEMA)
            split_indices(
                only_zero,
                SplitSpec(kind="cg_exclusion", factor_a="colour", value_a=1,
                          factor_b="shape", value_b=0),
            )
        with pytest.raises(SplitError, match="distinct factors"):
            split_indices(
                rep,
                SplitSpec(kind="cg_exclusion", factor_a="colour", value_a=0,
                          factor_b="colour", value_b=1),
            )
        with pytest.raises(SplitError, match="out of range"):
            split_indices(
                rep,
                SplitSpec(kind="cg_exclusion", factor_a="colour", value_a=5,
                          factor_b="shape", value_b=0),
            )
        with pytest.raises(SplitError):
            SplitSpec(kind="cg_exclusion", factor_a="colour", value_a=0)
        with pytest.raises(SplitError):
            SplitSpec(kind="upside_down")
