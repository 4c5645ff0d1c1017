from rest_framework import serializers

from .exceptions import DimacsError
from .models import BenchRow, BenchRun
from .sat import parse_dimacs


class ResourceTraceSerializer(serializers.Serializer):
    """Serializer for a run's ResourceTrace"""
    max_local_space = serializers.IntegerField(min_value=0)
    max_global_space = serializers.IntegerField(min_value=0)
    max_depth = serializers.IntegerField(min_value=0)
    total_steps = serializers.IntegerField(min_value=0)
    total_tokens_emitted = serializers.IntegerField(min_value=0)


class TraceSampleSerializer(serializers.Serializer):
    """One training sample: prompt, assistant prefix, assistant continuation"""
    user = serializers.CharField(trim_whitespace=False)
    assistant_prefix = serializers.CharField(allow_blank=True, trim_whitespace=False)
    assistant_content = serializers.CharField(trim_whitespace=False)

    def validate_user(self, value):
        if "[Current Task]" not in value or "[Root Problem]" not in value:
            raise serializers.ValidationError("user prompt does not follow the recursion template")
        return value

    def validate_assistant_content(self, value):
        if not value.endswith(("</call>", "</return>")):
            raise serializers.ValidationError("content must end with a call or return block")
        return value


class BenchRowSerializer(serializers.ModelSerializer):
    """Serializer for BenchRow model"""
    class Meta:
        model = BenchRow
        fields = [
            'instance_id', 'band', 'verdict', 'oracle_verdict', 'trajectory_tokens',
            'max_active_context', 'max_depth', 'steps', 'wall_time'
        ]


class BenchRunSerializer(serializers.ModelSerializer):
    """Serializer for BenchRun with its summary"""
    instances = serializers.SerializerMethodField()

    class Meta:
        model = BenchRun
        fields = ['id', 'created_at', 'bands', 'variables', 'workers', 'summary', 'instances']
        read_only_fields = fields

    def get_instances(self, obj):
        return obj.rows.count()


class BenchRunDetailSerializer(BenchRunSerializer):
    rows = BenchRowSerializer(many=True, read_only=True)

    class Meta(BenchRunSerializer.Meta):
        fields = BenchRunSerializer.Meta.fields + ['rows']


class SolveRequestSerializer(serializers.Serializer):
    """DIMACS text in, parsed formula out"""
    dimacs = serializers.CharField(trim_whitespace=False)
    max_steps = serializers.IntegerField(min_value=1, required=False)
    include_steps = serializers.BooleanField(default=False)

    def validate_dimacs(self, value):
        try:
            parse_dimacs(value)
        except DimacsError as exc:
            raise serializers.ValidationError(str(exc))
        return value
