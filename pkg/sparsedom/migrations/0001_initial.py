# Generated by Django 4.2 on 2026-10-17 10:12

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('experiment', models.CharField(max_length=64)),
                ('seed', models.IntegerField(default=0)),
                ('depth', models.IntegerField(default=0)),
                ('reps', models.IntegerField(default=1)),
                ('ratio', models.CharField(blank=True, help_text='r as written, e.g. 1/10', max_length=32)),
                ('parameters', models.JSONField(default=dict)),
                ('passed', models.BooleanField(default=False)),
                ('report_count', models.IntegerField(default=0)),
                ('failed_count', models.IntegerField(default=0)),
                ('report_path', models.CharField(blank=True, max_length=500)),
                ('report', models.JSONField(blank=True, default=dict)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('is_complete', models.BooleanField(default=False)),
                ('error_occurred', models.BooleanField(default=False)),
                ('error_message', models.TextField(blank=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='DominationRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('seed', models.IntegerField(default=0)),
                ('inequality_id', models.CharField(max_length=100)),
                ('best_constant', models.FloatField(blank=True, help_text='Null when unbounded', null=True)),
                ('unbounded', models.BooleanField(default=False)),
                ('proof_constant', models.FloatField(blank=True, help_text='Null when reported only', null=True)),
                ('witness_leaf', models.IntegerField(blank=True, null=True)),
                ('passed', models.BooleanField(default=False)),
                ('measured', models.JSONField(blank=True, default=dict)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='records', to='sparsedom.experimentrun')),
            ],
        ),
        migrations.AddIndex(
            model_name='experimentrun',
            index=models.Index(fields=['experiment'], name='sparsedom_e_experim_5c1f0a_idx'),
        ),
        migrations.AddIndex(
            model_name='experimentrun',
            index=models.Index(fields=['created_at'], name='sparsedom_e_created_8d2b41_idx'),
        ),
        migrations.AddIndex(
            model_name='dominationrecord',
            index=models.Index(fields=['inequality_id'], name='sparsedom_d_inequal_3a9e77_idx'),
        ),
    ]
