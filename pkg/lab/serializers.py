import json
from pathlib import Path

from rest_framework import serializers

from fock.kernels import FINITE_RANK, KERNEL_TYPES, RANK_ONE, ZERO
from spectra.constants import ANHARMONIC, CUSTOM, DIRICHLET_INTERVAL, FAMILY_TAGS

from .config import RunConfig, default_coupling, default_cutoff, default_husimi, default_output, default_tilted
from .constants import (
    ADAPTIVE,
    CONVENTIONS,
    COUPLING_RULES,
    CUTOFF_POLICIES,
    FIXED,
    INVERSE_TEMPERATURE,
    MAX_COUPLING_PRODUCT,
    MAX_STORED_SEED,
)
from .models import Campaign, ReportRow


class SpectrumSerializer(serializers.Serializer):
    family = serializers.ChoiceField(choices=FAMILY_TAGS, default=DIRICHLET_INTERVAL)
    modes = serializers.IntegerField(min_value=1, required=False)
    slope = serializers.FloatField(min_value=0.0, required=False, default=1.0)
    shift = serializers.FloatField(required=False, default=0.0)
    eigenvalues = serializers.ListField(child=serializers.FloatField(), required=False, allow_empty=False)

    def validate(self, attrs):
        family = attrs["family"]
        if family in (DIRICHLET_INTERVAL, ANHARMONIC) and "modes" not in attrs:
            raise serializers.ValidationError({"modes": f"{family} 스펙트럼에는 modes가 필요합니다."})
        if family == ANHARMONIC and attrs["slope"] <= 0:
            raise serializers.ValidationError({"slope": "slope는 0보다 커야 합니다."})
        if family == CUSTOM:
            if "eigenvalues" not in attrs:
                raise serializers.ValidationError({"eigenvalues": "custom 스펙트럼에는 값이 필요합니다."})
            if min(attrs["eigenvalues"]) + attrs["shift"] <= 0:
                raise serializers.ValidationError({"eigenvalues": "h must be strictly positive after the shift"})
            attrs["modes"] = len(attrs["eigenvalues"])
        if family == DIRICHLET_INTERVAL and 1 + attrs["shift"] <= 0:
            raise serializers.ValidationError({"shift": "h must be strictly positive after the shift"})
        return attrs


class KernelSerializer(serializers.Serializer):
    type = serializers.ChoiceField(choices=KERNEL_TYPES, default=ZERO)
    strength = serializers.FloatField(min_value=0.0, default=1.0)
    weight = serializers.FloatField(min_value=0.0, default=1.0)
    modes = serializers.ListField(
        child=serializers.IntegerField(min_value=0), min_length=2, max_length=2, required=False
    )
    decay = serializers.FloatField(min_value=0.0, required=False)
    vectors = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()), required=False)
    weights = serializers.ListField(child=serializers.FloatField(min_value=0.0), required=False)
    verify = serializers.BooleanField(default=True)

    def validate(self, attrs):
        if attrs["type"] == FINITE_RANK:
            vectors, weights = attrs.get("vectors"), attrs.get("weights")
            if not vectors or weights is None or len(vectors) != len(weights):
                raise serializers.ValidationError(
                    "finite_rank 커널에는 같은 길이의 vectors와 weights가 필요합니다."
                )
        if attrs["type"] != RANK_ONE and "modes" in attrs:
            raise serializers.ValidationError({"modes": "modes는 rank_one 커널에서만 씁니다."})
        return attrs


class CouplingSerializer(serializers.Serializer):
    rule = serializers.ChoiceField(choices=COUPLING_RULES)
    value = serializers.FloatField(min_value=0.0)


class CutoffSerializer(serializers.Serializer):
    policy = serializers.ChoiceField(choices=CUTOFF_POLICIES, default=ADAPTIVE)
    n_max = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    threshold = serializers.FloatField(min_value=0.0, max_value=1.0, required=False, allow_null=True, default=None)

    def validate(self, attrs):
        if attrs["policy"] == FIXED and attrs.get("n_max") is None:
            raise serializers.ValidationError({"n_max": "fixed 정책에는 n_max가 필요합니다."})
        if attrs["policy"] == ADAPTIVE and attrs.get("threshold") == 0:
            raise serializers.ValidationError({"threshold": "threshold는 0보다 커야 합니다."})
        return attrs


class HusimiSerializer(serializers.Serializer):
    modes = serializers.ListField(child=serializers.IntegerField(min_value=0), allow_empty=False, default=lambda: [0])
    n_samples = serializers.IntegerField(min_value=1, default=100_000)
    scale = serializers.FloatField(min_value=0.0, default=1.0)

    def validate_modes(self, value):
        if len(set(value)) != len(value):
            raise serializers.ValidationError("중복된 mode가 있습니다.")
        return sorted(value)


class TiltedSerializer(serializers.Serializer):
    powers = serializers.ListField(child=serializers.IntegerField(min_value=0), required=False, allow_null=True)
    k = serializers.IntegerField(min_value=0, default=1)


class OutputSerializer(serializers.Serializer):
    dir = serializers.CharField(required=False, allow_null=True, default=None)
    gnuplot = serializers.BooleanField(default=False)


class RunConfigSerializer(serializers.Serializer):
    """Validates a RunConfig JSON document; ``save()`` returns a RunConfig."""

    name = serializers.CharField(required=False, allow_blank=True, default="")
    spectrum = SpectrumSerializer()
    kernel = KernelSerializer(required=False, default=lambda: {"type": ZERO})
    temperatures = serializers.ListField(child=serializers.FloatField())
    coupling = CouplingSerializer(required=False, default=default_coupling)
    cutoff = CutoffSerializer(required=False, default=default_cutoff)
    k = serializers.IntegerField(min_value=1, default=1)
    schatten_p = serializers.FloatField(default=1.0)
    n_samples = serializers.IntegerField(min_value=1, default=1_000_000)
    seed = serializers.IntegerField(required=False, allow_null=True, default=None)
    threads = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    convention = serializers.ChoiceField(choices=CONVENTIONS, required=False, allow_null=True, default=None)
    husimi = HusimiSerializer(required=False, default=default_husimi)
    tilted = TiltedSerializer(required=False, default=default_tilted)
    output = OutputSerializer(required=False, default=default_output)

    def validate_temperatures(self, value):
        if not value:
            raise serializers.ValidationError("온도 격자가 비어 있습니다.")
        if any(T <= 0 for T in value):
            raise serializers.ValidationError("온도는 0보다 커야 합니다.")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise serializers.ValidationError("온도 격자는 오름차순이어야 합니다.")
        return value

    def validate_schatten_p(self, value):
        if value < 1:
            raise serializers.ValidationError("Schatten 지수는 1 이상이어야 합니다.")
        return value

    def validate_seed(self, value):
        if value is not None and not 0 <= value <= MAX_STORED_SEED:
            raise serializers.ValidationError(f"seed must lie in [0, {MAX_STORED_SEED}]")
        return value

    def validate(self, attrs):
        J = attrs["spectrum"]["modes"]
        coupling = attrs["coupling"]
        products = [
            coupling["value"] * (1.0 if coupling["rule"] == INVERSE_TEMPERATURE else T) for T in attrs["temperatures"]
        ]
        if max(products) > MAX_COUPLING_PRODUCT:
            raise serializers.ValidationError(
                {"coupling": f"λ(T)·T reaches {max(products):g}, above {MAX_COUPLING_PRODUCT:g}"}
            )
        cutoff = attrs["cutoff"]
        if cutoff["policy"] == FIXED and attrs["k"] > cutoff["n_max"]:
            raise serializers.ValidationError({"k": f"k={attrs['k']} exceeds N_max={cutoff['n_max']}"})
        if max(attrs["husimi"]["modes"]) >= J:
            raise serializers.ValidationError({"husimi": f"Husimi modes must be below J={J}"})
        kernel = attrs["kernel"]
        if "modes" in kernel and max(kernel["modes"]) >= J:
            raise serializers.ValidationError({"kernel": f"kernel modes must be below J={J}"})
        powers = attrs["tilted"].get("powers")
        if powers and len(powers) != J:
            raise serializers.ValidationError({"tilted": f"need {J} powers, got {len(powers)}"})
        return attrs

    def create(self, validated_data):
        return RunConfig(**validated_data)


def parse_run_config(payload):
    """RunConfig from a dict, a JSON string or a path to a JSON file; raises ValidationError."""
    if isinstance(payload, (str, Path)) and Path(payload).suffix == ".json":
        try:
            payload = Path(payload).read_text(encoding="utf-8")
        except OSError as exc:
            raise serializers.ValidationError(f"cannot read config: {exc}")
    if isinstance(payload, str):
        try:
            payload = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise serializers.ValidationError(f"config is not valid JSON: {exc}")
    serializer = RunConfigSerializer(data=payload)
    serializer.is_valid(raise_exception=True)
    return serializer.save()


class ReportRowSerializer(serializers.ModelSerializer):
    campaign_kind = serializers.CharField(source="campaign.kind", read_only=True)

    class Meta:
        model = ReportRow
        fields = [
            "id",
            "campaign",
            "campaign_kind",
            "temperature",
            "coupling",
            "n_max",
            "log_z_lambda",
            "log_z_free",
            "ratio",
            "z_r",
            "z_r_stderr",
            "distance",
            "distance_stderr",
            "tail_certificate",
            "checks",
            "passed",
        ]
        read_only_fields = fields


class CampaignSerializer(serializers.ModelSerializer):
    row_count = serializers.IntegerField(source="rows.count", read_only=True)

    class Meta:
        model = Campaign
        fields = ["id", "kind", "name", "config", "seed", "mode_count", "created_at", "summary", "passed", "row_count"]
        read_only_fields = fields


class CampaignDetailSerializer(CampaignSerializer):
    rows = ReportRowSerializer(many=True, read_only=True)

    class Meta(CampaignSerializer.Meta):
        fields = CampaignSerializer.Meta.fields + ["rows"]
        read_only_fields = fields
