import pytest

from stencilroof import hwdb
from stencilroof.hwdb import (
    A100_NAME,
    EXAMPLE_PROFILE_TOML,
    ProfileError,
    builtin_profiles,
    get_profile,
    load_profiles,
    parse_rate,
    ridge_points,
    serialize_profiles,
)


def write(tmp_path, text):
    path = tmp_path / "profiles.toml"
    path.write_text(text)
    return path


class TestParseRate:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("19.5 TFLOPS", 19.5e12),
            ("1935 GB/s", 1.935e12),
            ("9.7TFLOPS", 9.7e12),
            ("2 PFLOPS", 2e15),
            ("312e12 FLOPS", 312e12),
            (1.5e12, 1.5e12),
        ],
    )
    def test_accepted_forms(self, text, expected):
        assert parse_rate(text) == expected

    @pytest.mark.parametrize("text", ["fast", "19.5", "19.5 TFLOP", "GB/s"])
    def test_rejected_forms(self, text):
        with pytest.raises(ProfileError):
            parse_rate(text)


class TestBuiltinProfile:
    def test_a100_values(self):
        profile = get_profile(A100_NAME)
        assert profile.bandwidth == 1.935e12
        assert profile.dtypes["double"].cuda == 9.7e12
        assert profile.dtypes["double"].tc_dense == 19.5e12
        assert profile.dtypes["double"].tc_sparse is None
        assert profile.dtypes["float"].cuda == 19.5e12
        assert profile.dtypes["float"].tc_dense == 156e12
        assert profile.dtypes["float"].tc_sparse == 312e12

    def test_a100_ridge_points_round_to_published_integers(self):
        profile = get_profile(A100_NAME)
        assert ridge_points(profile, "double").rounded() == {"cuda": 5, "tc_dense": 10}
        assert ridge_points(profile, "float").rounded() == {
            "cuda": 10,
            "tc_dense": 81,
            "tc_sparse": 161,
        }

    def test_full_precision_retained(self):
        ridges = ridge_points(get_profile(A100_NAME), "double")
        assert ridges.cuda == pytest.approx(5.0129198966, rel=1e-9)
        assert ridges.tc_dense == pytest.approx(10.0775193798, rel=1e-9)

    def test_unknown_profile(self):
        with pytest.raises(ProfileError, match="unknown hardware profile"):
            get_profile("h100")

    def test_missing_dtype(self):
        with pytest.raises(ProfileError, match="no datatype"):
            ridge_points(get_profile(A100_NAME), "half")

    def test_unit_rate_equals_one_when_peak_equals_bandwidth(self):
        profile = hwdb.HardwareProfile(
            name="flat", bandwidth=1e12,
            dtypes={"float": hwdb.UnitPeaks(cuda=1e12, tc_dense=1e12)},
        )
        assert ridge_points(profile, "float").cuda == 1.0


class TestLoadProfiles:
    def test_example_schema_loads(self, tmp_path):
        pf = load_profiles(write(tmp_path, EXAMPLE_PROFILE_TOML))
        assert pf.schema_version == 1
        profile = pf.profiles["example-gpu"]
        assert profile.bandwidth == 1e12
        assert profile.dtypes["float"].tc_sparse == 320e12

    def test_empty_profile_list_is_valid(self, tmp_path):
        pf = load_profiles(write(tmp_path, "schema_version = 1\n"))
        assert pf.profiles == {}

    def test_unknown_key_is_named(self, tmp_path):
        text = EXAMPLE_PROFILE_TOML.replace('name = "example-gpu"', 'name = "x"\nclokc = 3')
        with pytest.raises(ProfileError, match="clokc"):
            load_profiles(write(tmp_path, text))

    def test_unknown_peak_key_is_named(self, tmp_path):
        text = EXAMPLE_PROFILE_TOML + "\n[profiles.dtypes.half]\ncuda = 1.0\ntc_dens = 2.0\n"
        with pytest.raises(ProfileError, match="tc_dens"):
            load_profiles(write(tmp_path, text))

    def test_negative_bandwidth_rejected(self, tmp_path):
        text = EXAMPLE_PROFILE_TOML.replace('"1000 GB/s"', "-5.0")
        with pytest.raises(ProfileError, match="bandwidth must be positive"):
            load_profiles(write(tmp_path, text))

    def test_duplicate_names_rejected(self, tmp_path):
        dup = EXAMPLE_PROFILE_TOML + "\n" + EXAMPLE_PROFILE_TOML.split("\n", 2)[2]
        with pytest.raises(ProfileError, match="duplicate profile name"):
            load_profiles(write(tmp_path, dup))

    def test_missing_required_peak(self, tmp_path):
        text = EXAMPLE_PROFILE_TOML.replace('cuda = "10 TFLOPS"\n', "")
        with pytest.raises(ProfileError, match="missing required peak 'cuda'"):
            load_profiles(write(tmp_path, text))

    def test_sparse_below_dense_rejected(self, tmp_path):
        text = EXAMPLE_PROFILE_TOML.replace('tc_sparse = "320 TFLOPS"', 'tc_sparse = "80 TFLOPS"')
        with pytest.raises(ProfileError, match="tc_sparse"):
            load_profiles(write(tmp_path, text))

    def test_parse_error_reports_position(self, tmp_path):
        with pytest.raises(ProfileError, match="line"):
            load_profiles(write(tmp_path, "schema_version = \n"))

    def test_bad_schema_version(self, tmp_path):
        with pytest.raises(ProfileError, match="schema_version"):
            load_profiles(write(tmp_path, "schema_version = 99\n"))

    def test_unknown_dtype_name(self, tmp_path):
        text = EXAMPLE_PROFILE_TOML.replace("dtypes.double", "dtypes.quad")
        with pytest.raises(ProfileError, match="quad"):
            load_profiles(write(tmp_path, text))

    def test_file_entries_shadow_builtins(self, tmp_path):
        text = EXAMPLE_PROFILE_TOML.replace("example-gpu", A100_NAME)
        path = write(tmp_path, text)
        assert get_profile(A100_NAME, path).bandwidth == 1e12


class TestRoundTrip:
    def test_serialize_then_load_is_semantically_identical(self, tmp_path):
        first = load_profiles(write(tmp_path, EXAMPLE_PROFILE_TOML))
        path = tmp_path / "echo.toml"
        path.write_text(serialize_profiles(first))
        assert load_profiles(path) == first

    def test_builtin_round_trip(self, tmp_path):
        pf = builtin_profiles()
        path = tmp_path / "builtin.toml"
        path.write_text(serialize_profiles(pf))
        assert load_profiles(path) == pf
